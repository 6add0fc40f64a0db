//! Natural-language context queries built from a series and its domain.

use std::collections::HashMap;

use chrono::NaiveDateTime;
use serde::Deserialize;

use super::PromptError;
use crate::series::{DomainKind, Step, TimeSeries};

/// One-step and multi-step question templates for a domain.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Template {
    pub single: String,
    pub multi: String,
}

#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: HashMap<DomainKind, Template>,
}

impl TemplateRegistry {
    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        let raw: HashMap<String, Template> =
            toml::from_str(text).map_err(|e| PromptError::Config(format!("templates: {e}")))?;
        let mut templates = HashMap::new();
        for (key, template) in raw {
            let kind = DomainKind::from_key(&key)
                .ok_or_else(|| PromptError::Config(format!("templates: unknown domain kind {key:?}")))?;
            templates.insert(kind, template);
        }
        Ok(Self { templates })
    }

    pub fn get(&self, kind: DomainKind) -> Option<&Template> {
        self.templates.get(&kind)
    }

    pub fn insert(&mut self, kind: DomainKind, template: Template) {
        self.templates.insert(kind, template);
    }

    pub fn remove(&mut self, kind: DomainKind) -> Option<Template> {
        self.templates.remove(&kind)
    }
}

/// Integers print without a decimal point; anything else with at most three
/// decimals, trailing zeros trimmed.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let text = format!("{v:.3}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    match text {
        "-0" => "0".to_string(),
        t => t.to_string(),
    }
}

/// `April 15, 2020, Wednesday`; hourly series append `, 17:00`.
pub fn format_timestamp(at: NaiveDateTime, step: Step) -> String {
    match step {
        Step::Day => at.format("%B %d, %Y, %A").to_string(),
        Step::Hour => at.format("%B %d, %Y, %A, %H:%M").to_string(),
    }
}

fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PromptError::Config(format!("unclosed placeholder in {template:?}")))?;
        let name = &after[..close];
        let value = lookup(name)
            .ok_or_else(|| PromptError::Config(format!("unknown placeholder {{{name}}}")))?;
        out.push_str(&value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub(super) fn render(
    registry: &TemplateRegistry,
    series: &TimeSeries,
    horizon: usize,
) -> Result<String, PromptError> {
    if horizon == 0 {
        return Err(PromptError::Config("horizon must be positive".into()));
    }
    let ctx = series.context();
    let template = registry
        .get(ctx.domain_kind)
        .ok_or(PromptError::Template(ctx.domain_kind))?;
    let body = if horizon == 1 { &template.single } else { &template.multi };
    let n = series.len();
    let step = series.step();
    let values = series
        .values()
        .iter()
        .map(|&v| format_value(v))
        .collect::<Vec<_>>()
        .join(", ");
    fill(body, |name| {
        Some(match name {
            "start" => format_timestamp(series.start(), step),
            "end" => format_timestamp(series.end(), step),
            "next" => format_timestamp(series.timestamp(n), step),
            "last" => format_timestamp(series.timestamp(n + horizon - 1), step),
            "entity" => ctx.entity_id.clone(),
            "values" => values.clone(),
            "unit" => ctx.unit_phrase.clone(),
            "resolution" => ctx.resolution_phrase.clone(),
            "horizon" => horizon.to_string(),
            _ => return None,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(44.0), "44");
        assert_eq!(format_value(-3.0), "-3");
        assert_eq!(format_value(18.4), "18.4");
        assert_eq!(format_value(5.123456), "5.123");
        assert_eq!(format_value(2.0005), "2.001");
        assert_eq!(format_value(-0.0001), "0");
        assert_eq!(format_value(0.1 + 0.2), "0.3");
    }

    #[test]
    fn placeholders() {
        let s = fill("a {x} b {y}", |n| match n {
            "x" => Some("1".into()),
            "y" => Some("{x}".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(s, "a 1 b {x}");
        assert!(fill("a {z}", |_| None).is_err());
        assert!(fill("a {x", |_| Some(String::new())).is_err());
    }
}
