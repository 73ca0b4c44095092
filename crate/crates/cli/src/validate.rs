use std::fmt;

use koopman_core::{Dictionary, DynamicalSystem, Measure};

use crate::params::{parse_count_list, parse_eval, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

fn error(message: String) -> Diagnostic {
    Diagnostic { severity: Severity::Error, message }
}

fn warning(message: String) -> Diagnostic {
    Diagnostic { severity: Severity::Warning, message }
}

/// Checks identifiers, dimensions and sample counts without running
/// anything. A well-formed configuration yields no diagnostics.
pub fn validate(p: &Params) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let system = match p.system.as_deref().map(DynamicalSystem::parse) {
        Some(Ok(s)) => Some(s),
        Some(Err(e)) => {
            out.push(error(format!("system: {e}")));
            None
        }
        None => None,
    };
    let measure = match p.measure.as_deref().map(Measure::parse) {
        Some(Ok(m)) => Some(m),
        Some(Err(e)) => {
            out.push(error(format!("measure: {e}")));
            None
        }
        None => None,
    };
    let dict = match p.dict.as_deref().map(|d| Dictionary::parse(d, measure.as_ref())) {
        Some(Ok(d)) => Some(d),
        Some(Err(e)) => {
            out.push(error(format!("dict: {e}")));
            None
        }
        None => None,
    };
    if let (Some(s), Some(m)) = (&system, &measure) {
        if s.dim() != m.dim() {
            out.push(error(format!(
                "measure `{}` has dimension {} but system `{}` has dimension {}",
                m,
                m.dim(),
                s.name(),
                s.dim()
            )));
        }
    }
    if let (Some(s), Some(d)) = (&system, &dict) {
        if s.dim() != d.dim() {
            out.push(error(format!(
                "dictionary `{d}` acts on dimension {} but system `{}` has dimension {}",
                d.dim(),
                s.name(),
                s.dim()
            )));
        }
    }
    let ms = match p.m.as_deref() {
        Some(text) => {
            let counts: Vec<&str> = text.split(',').filter(|t| t.trim() != "analytic").collect();
            if counts.is_empty() {
                Some(Vec::new())
            } else {
                match parse_count_list("M", &counts.join(",")) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        out.push(error(e.to_string()));
                        None
                    }
                }
            }
        }
        None => None,
    };
    if let Some(text) = p.n.as_deref() {
        if let Err(e) = parse_count_list("N", text) {
            out.push(error(e.to_string()));
        }
    }
    if let Some(text) = p.eval.as_deref() {
        if let Err(e) = parse_eval(text) {
            out.push(error(e.to_string()));
        }
    }
    if let (Some(ms), Some(d)) = (&ms, &dict) {
        let n = d.len();
        for &m in ms.iter().filter(|&&m| m < n) {
            out.push(warning(format!(
                "M={m} is below the dictionary size N={n}; the data matrix is only invertible almost surely for M >= N"
            )));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(system: &str, dict: &str, m: &str) -> Params {
        Params {
            system: Some(system.into()),
            dict: Some(dict.into()),
            measure: Some("uniform:-1,1".into()),
            m: Some(m.into()),
            ..Default::default()
        }
    }

    #[test]
    fn few_samples_warn() {
        let d = validate(&params("logistic", "legendre:8", "5"));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Warning);
        assert!(d[0].message.contains("M >= N"));
    }

    #[test]
    fn unknown_system_is_error() {
        let d = validate(&params("lorenz", "legendre:8", "100"));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Error);
        assert!(d[0].to_string().starts_with("error: system"));
    }

    #[test]
    fn well_formed_is_clean() {
        assert!(validate(&params("logistic", "legendre:8", "100,1000,analytic")).is_empty());
    }
}
