use chrono::{NaiveDate, NaiveDateTime};

use crate::schema::ColumnType;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    /// The string could not be read as the hinted type. `fallback` holds its
    /// text normalization.
    #[error("cannot read `{raw}` as {hint:?}")]
    Unparseable { raw: String, hint: ColumnType, fallback: String },
}

impl ValueError {
    pub fn fallback(&self) -> &str {
        match self {
            Self::Unparseable { fallback, .. } => fallback,
        }
    }
}

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d", "%Y/%m/%d", "%Y.%m.%d", "%m/%d/%Y", "%d.%m.%Y", "%b %d, %Y", "%b %d %Y",
    "%B %d, %Y", "%B %d %Y", "%b. %d, %Y", "%d %b %Y", "%d %B %Y", "%d %b, %Y", "%d %B, %Y",
];

const DATETIME_FORMATS: &[&str] = &["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"];

/// Canonical form of a cell or question value: ISO dates, plain decimals,
/// lowercase whitespace-collapsed text.
pub fn normalize_value(raw: &str, hint: ColumnType) -> Result<String, ValueError> {
    match hint {
        ColumnType::Integer | ColumnType::Real => {
            Ok(canonical_number(raw).unwrap_or_else(|| normalize_text(raw)))
        }
        ColumnType::Date => parse_date(raw).ok_or_else(|| ValueError::Unparseable {
            raw: raw.to_string(),
            hint,
            fallback: normalize_text(raw),
        }),
        ColumnType::Boolean => Ok(match normalize_text(raw).as_str() {
            "t" | "true" | "yes" | "y" | "1" => "true".into(),
            "f" | "false" | "no" | "n" | "0" => "false".into(),
            other => other.to_string(),
        }),
        ColumnType::Text | ColumnType::Other => Ok(normalize_text(raw)),
    }
}

/// Guesses a type for a literal that has no column to borrow a hint from.
pub fn infer_hint(raw: &str) -> ColumnType {
    if canonical_number(raw).is_some() {
        ColumnType::Real
    } else if parse_date(raw).is_some() {
        ColumnType::Date
    } else {
        ColumnType::Text
    }
}

pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub(crate) fn parse_date(raw: &str) -> Option<String> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
        .or_else(|| {
            DATETIME_FORMATS
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok().map(|dt| dt.date()))
        })
        .map(|d| d.format("%Y-%m-%d").to_string())
}

/// Decimal string without separators, redundant zeros or a `+` sign.
pub(crate) fn canonical_number(raw: &str) -> Option<String> {
    let cleaned: String = raw.trim().chars().filter(|&c| c != ',' && c != '_').collect();
    let (negative, body) = match cleaned.as_bytes().first()? {
        b'-' => (true, &cleaned[1..]),
        b'+' => (false, &cleaned[1..]),
        _ => (false, cleaned.as_str()),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    // Separators are only legal between digit groups.
    if raw.trim().starts_with(',') || raw.trim().ends_with(',') || raw.contains(",,") {
        return None;
    }
    let int_digits = int_part.trim_start_matches('0');
    let frac_digits = frac_part.trim_end_matches('0');
    let mut out = String::new();
    if int_digits.is_empty() {
        out.push('0');
    } else {
        out.push_str(int_digits);
    }
    if !frac_digits.is_empty() {
        out.push('.');
        out.push_str(frac_digits);
    }
    if negative && out != "0" {
        out.insert(0, '-');
    }
    Some(out)
}
