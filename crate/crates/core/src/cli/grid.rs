use crate::error::{Error, Result};

/// Parses a real grid: `a:b:step` (inclusive), a comma list, or a single
/// value. Values are snapped to 12 significant digits.
pub fn parse_real_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("grid value `{s}` is not a finite number"))
            })
    };
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "grid `{text}` must have the form start:stop:step"
            )));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 || b < a {
            return Err(Error::InvalidArgument(format!(
                "grid `{text}` needs start <= stop and a positive step"
            )));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| snap(a + i as f64 * step)).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    check_monotone(&values, text)?;
    Ok(values)
}

/// Parses an integer grid: `a:b[:step]` (inclusive), a comma list, or a
/// single value.
pub fn parse_int_grid(text: &str) -> Result<Vec<usize>> {
    let num = |s: &str| -> Result<usize> {
        s.trim().parse::<usize>().map_err(|_| {
            Error::InvalidArgument(format!("grid value `{s}` is not a nonnegative integer"))
        })
    };
    let values: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(Error::InvalidArgument(format!(
                "grid `{text}` must have the form start:stop[:step]"
            )));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let step = if parts.len() == 3 { num(parts[2])? } else { 1 };
        if step == 0 || b < a {
            return Err(Error::InvalidArgument(format!(
                "grid `{text}` needs start <= stop and a positive step"
            )));
        }
        (a..=b).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<usize>>>()?
    };
    let as_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    check_monotone(&as_f, text)?;
    Ok(values)
}

fn check_monotone(values: &[f64], text: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("grid `{text}` is empty")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "grid `{text}` is not increasing"
        )));
    }
    Ok(())
}

fn snap(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}
