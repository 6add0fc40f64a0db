use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, TimeDelta, Timelike};

use super::{SeriesContext, SeriesError, Step, TimeSeries};

const ATTRIBUTE: &str = "Global_intensity";

/// One row of the per-minute household log. `None` marks a `?` entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteObs {
    pub at: NaiveDateTime,
    pub value: Option<f64>,
}

/// Parse the semicolon-delimited UCI household power file, keeping only
/// `Global_intensity`.
///
/// Row indices in errors count data rows from zero (the header is not a row).
pub fn parse_ihepc_minutes<R: Read>(reader: R) -> Result<Vec<MinuteObs>, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| SeriesError::Format(e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SeriesError::Format(format!("missing column {name:?}")))
    };
    let date_col = column("Date")?;
    let time_col = column("Time")?;
    let value_col = column(ATTRIBUTE)?;

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| SeriesError::Record {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(SeriesError::Record {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[date_col], "%d/%m/%Y").map_err(|e| {
            SeriesError::Record {
                row,
                message: format!("bad date {:?}: {e}", &record[date_col]),
            }
        })?;
        let time = NaiveTime::parse_from_str(&record[time_col], "%H:%M:%S").map_err(|e| {
            SeriesError::Record {
                row,
                message: format!("bad time {:?}: {e}", &record[time_col]),
            }
        })?;
        let raw = &record[value_col];
        let value = match raw {
            "?" | "" => None,
            text => match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    return Err(SeriesError::Record {
                        row,
                        message: format!("bad {ATTRIBUTE} value {text:?}"),
                    })
                }
            },
        };
        out.push(MinuteObs {
            at: date.and_time(time),
            value,
        });
    }
    Ok(out)
}

fn hour_of(at: NaiveDateTime) -> NaiveDateTime {
    at.date().and_hms_opt(at.hour(), 0, 0).expect("valid hour")
}

/// Average minute observations into one value per calendar hour.
///
/// Every hour between the first and last observation gets a value. Hours
/// with no observed minute repeat the previous hour; the first hour must
/// have at least one.
pub fn resample_hourly(
    minutes: &[MinuteObs],
    id: impl Into<String>,
    context: SeriesContext,
) -> Result<TimeSeries, SeriesError> {
    let (first, last) = match (minutes.first(), minutes.last()) {
        (Some(f), Some(l)) => (hour_of(f.at), hour_of(l.at)),
        _ => return Err(SeriesError::Empty),
    };
    if let Some(index) = minutes.windows(2).position(|w| w[1].at < w[0].at) {
        return Err(SeriesError::Unordered { index: index + 1 });
    }

    let hours = (last - first).num_hours() as usize + 1;
    // (sum, count, min, max) per hour
    let mut acc = vec![(0.0_f64, 0_usize, f64::INFINITY, f64::NEG_INFINITY); hours];
    for obs in minutes {
        if let Some(v) = obs.value {
            let slot = &mut acc[(hour_of(obs.at) - first).num_hours() as usize];
            slot.0 += v;
            slot.1 += 1;
            slot.2 = slot.2.min(v);
            slot.3 = slot.3.max(v);
        }
    }

    let mut values = Vec::with_capacity(hours);
    for (k, &(sum, count, lo, hi)) in acc.iter().enumerate() {
        if count == 0 {
            match values.last() {
                Some(&prev) => values.push(prev),
                None => {
                    return Err(SeriesError::FirstHourMissing {
                        hour: first + TimeDelta::hours(k as i64),
                    })
                }
            }
        } else {
            // clamp absorbs summation rounding so the mean stays within its inputs
            values.push((sum / count as f64).clamp(lo, hi));
        }
    }
    TimeSeries::new(id, values, first, Step::Hour, context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::DomainKind;

    const HEADER: &str = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3\n";

    fn ctx() -> SeriesContext {
        SeriesContext::new(DomainKind::HouseholdCurrentHourly, "1")
    }

    fn at(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2006, 12, 16)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    #[test]
    fn parses_first_row_of_uci_file() {
        let text = format!("{HEADER}16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n");
        let obs = parse_ihepc_minutes(text.as_bytes()).unwrap();
        assert_eq!(obs, vec![MinuteObs { at: at(17, 24), value: Some(18.4) }]);
    }

    #[test]
    fn question_mark_is_missing() {
        let text = format!("{HEADER}21/12/2006;11:23:00;?;?;?;?;?;?;\n1/1/2007;00:00:00;2.580;0.136;241.970;10.600;0.000;0.000;0.000\n");
        let obs = parse_ihepc_minutes(text.as_bytes()).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].value, None);
        assert_eq!(obs[1].value, Some(10.6));
        assert_eq!(obs[1].at.date(), NaiveDate::from_ymd_opt(2007, 1, 1).unwrap());
    }

    #[test]
    fn empty_input_is_empty_series() {
        assert!(parse_ihepc_minutes("".as_bytes()).unwrap().is_empty());
        assert!(parse_ihepc_minutes(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_rows_report_their_index() {
        let text = format!("{HEADER}16/12/2006;17:24:00;1;1;1;1.0;0;0;0\n32/12/2006;17:25:00;1;1;1;1.0;0;0;0\n");
        match parse_ihepc_minutes(text.as_bytes()) {
            Err(SeriesError::Record { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{HEADER}16/12/2006;17h24;1;1;1;1.0;0;0;0\n");
        assert!(matches!(
            parse_ihepc_minutes(text.as_bytes()),
            Err(SeriesError::Record { row: 0, .. })
        ));
    }

    #[test]
    fn unknown_layout_is_fatal() {
        let text = "Date;Time;Voltage\n16/12/2006;17:24:00;234.8\n";
        assert!(matches!(
            parse_ihepc_minutes(text.as_bytes()),
            Err(SeriesError::Format(_))
        ));
    }

    #[test]
    fn constant_hour_averages_exactly() {
        for c in [18.4, 0.1, 7.0, 3.3333] {
            let minutes: Vec<_> = (0..60)
                .map(|m| MinuteObs { at: at(17, m), value: Some(c) })
                .collect();
            let s = resample_hourly(&minutes, "h", ctx()).unwrap();
            assert_eq!(s.values(), &[c]);
        }
    }

    #[test]
    fn mean_over_available_minutes() {
        let minutes: Vec<_> = (0..60)
            .map(|m| MinuteObs {
                at: at(9, m),
                value: if m < 3 { Some(m as f64 + 1.0) } else { None },
            })
            .collect();
        let s = resample_hourly(&minutes, "h", ctx()).unwrap();
        assert_eq!(s.values(), &[2.0]);
    }

    #[test]
    fn missing_hour_forward_fills_and_gaps_are_spanned() {
        let mut minutes = vec![
            MinuteObs { at: at(1, 0), value: Some(5.0) },
            MinuteObs { at: at(1, 1), value: Some(6.0) },
            MinuteObs { at: at(2, 30), value: None },
        ];
        // hour 3 has no rows at all
        minutes.push(MinuteObs { at: at(4, 0), value: Some(1.0) });
        let s = resample_hourly(&minutes, "h", ctx()).unwrap();
        assert_eq!(s.values(), &[5.5, 5.5, 5.5, 1.0]);
        assert_eq!(s.start(), at(1, 0));
        assert_eq!(s.step(), Step::Hour);
    }

    #[test]
    fn first_hour_missing_is_fatal() {
        let minutes = vec![
            MinuteObs { at: at(1, 0), value: None },
            MinuteObs { at: at(2, 0), value: Some(1.0) },
        ];
        assert!(matches!(
            resample_hourly(&minutes, "h", ctx()),
            Err(SeriesError::FirstHourMissing { .. })
        ));
    }

    #[test]
    fn out_of_order_minutes_are_rejected() {
        let minutes = vec![
            MinuteObs { at: at(2, 0), value: Some(1.0) },
            MinuteObs { at: at(1, 0), value: Some(1.0) },
        ];
        assert!(matches!(
            resample_hourly(&minutes, "h", ctx()),
            Err(SeriesError::Unordered { index: 1 })
        ));
    }
}
