//! Dataset ingestion: one observation per line, comma or whitespace
//! delimited, with an optional header line detected by a non-numeric first
//! token.

use crate::CliError;

pub struct Dataset {
    pub values: Vec<f64>,
    pub source_path: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Loads observations in file order. Values must lie strictly inside (0, 1)
/// unless `clamp_eps` is given, in which case out-of-range values are clamped
/// into [eps, 1−eps].
pub fn load_dataset(path: &str, clamp_eps: Option<f64>) -> Result<Dataset, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let mut values = Vec::new();
    let mut first_content_line = true;
    for (line_no, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split([',', ' ', '\t', ';']).filter(|t| !t.is_empty()).collect();
        let parsed: Option<Vec<f64>> = tokens.iter().map(|t| t.parse::<f64>().ok()).collect();
        match parsed {
            Some(row) => values.extend(row),
            None if first_content_line => {
                // header line
            }
            None => {
                return Err(CliError::Input(format!(
                    "{path}: malformed row at line {}: {trimmed:?}",
                    line_no + 1
                )));
            }
        }
        first_content_line = false;
    }
    if let Some(eps) = clamp_eps {
        if !(0.0 < eps && eps < 0.5) {
            return Err(CliError::Input(format!("--clamp-eps {eps} must lie in (0, 0.5)")));
        }
        for v in &mut values {
            *v = v.clamp(eps, 1.0 - eps);
        }
    } else if let Some((index, value)) =
        values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0))
    {
        return Err(CliError::Input(format!(
            "{path}: observation {index} = {value} outside the open interval (0, 1); \
             pass --clamp-eps to clamp such values"
        )));
    }
    Ok(Dataset { values, source_path: path.to_string() })
}
