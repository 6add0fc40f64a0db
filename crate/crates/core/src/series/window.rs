use super::{SeriesError, TimeSeries};

/// Sliding-window layout: `length` points, advancing by `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
    pub max_windows: Option<usize>,
}

impl WindowSpec {
    pub fn new(length: usize, stride: usize, max_windows: Option<usize>) -> Result<Self, SeriesError> {
        if length < 2 {
            return Err(SeriesError::InvalidWindow(format!("length {length} < 2")));
        }
        if stride == 0 {
            return Err(SeriesError::InvalidWindow("stride must be at least 1".into()));
        }
        if max_windows == Some(0) {
            return Err(SeriesError::InvalidWindow("max_windows must be positive".into()));
        }
        Ok(Self {
            length,
            stride,
            max_windows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowWarning {
    SeriesTooShort { len: usize, required: usize },
}

#[derive(Debug, Clone)]
pub struct Windows {
    pub windows: Vec<TimeSeries>,
    pub warning: Option<WindowWarning>,
}

/// Number of windows `build_windows` yields for a series of `n` points.
pub fn window_count(n: usize, spec: &WindowSpec) -> usize {
    if n < spec.length {
        return 0;
    }
    let all = (n - spec.length) / spec.stride + 1;
    spec.max_windows.map_or(all, |cap| all.min(cap))
}

/// Cut `series` into windows at offsets `0, stride, 2*stride, ...`, keeping
/// the earliest `max_windows` when capped.
pub fn build_windows(series: &TimeSeries, spec: &WindowSpec) -> Windows {
    let n = series.len();
    if n < spec.length {
        tracing::warn!(len = n, required = spec.length, "series shorter than window");
        return Windows {
            windows: Vec::new(),
            warning: Some(WindowWarning::SeriesTooShort {
                len: n,
                required: spec.length,
            }),
        };
    }
    let windows = (0..window_count(n, spec))
        .map(|i| {
            let offset = i * spec.stride;
            series.slice(format!("{}@{offset}", series.id()), offset, spec.length)
        })
        .collect();
    Windows {
        windows,
        warning: None,
    }
}
