//! Sample files: a `SPQN-DATA 1 N=<n>` header, then one newline-terminated
//! line of exactly `n` characters from `{0,1,*}` per sample. Line numbers
//! in errors are 1-based and count the header.

use std::path::Path;

use spqn_core::{Evidence, Value};

use crate::{FormatError, Result};

const MAGIC: &str = "SPQN-DATA 1 N=";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_vars: usize,
    pub samples: Vec<Evidence>,
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let err = |line: usize, detail: String| FormatError::Dataset { line, detail };
    let mut lines = text.split_inclusive('\n').enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let num_vars: usize = header
        .strip_suffix('\n')
        .and_then(|h| h.strip_prefix(MAGIC))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| err(1, format!("expected header `{MAGIC}<n>`, found {:?}", header.trim_end())))?;
    let mut samples = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let body = raw
            .strip_suffix('\n')
            .ok_or_else(|| err(line, "line is not newline-terminated".into()))?;
        let values = body
            .chars()
            .map(Value::from_char)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                let bad = body.chars().find(|c| Value::from_char(*c).is_none()).unwrap();
                err(line, format!("character {bad:?} is not one of 0, 1, *"))
            })?;
        if values.len() != num_vars {
            return Err(err(line, format!("expected {num_vars} characters, found {}", values.len())));
        }
        samples.push(Evidence::new(values));
    }
    Ok(Dataset { num_vars, samples })
}

pub fn dataset_to_string(num_vars: usize, samples: &[Evidence]) -> String {
    let mut out = String::with_capacity((num_vars + 1) * (samples.len() + 1) + MAGIC.len());
    out.push_str(MAGIC);
    out.push_str(&num_vars.to_string());
    out.push('\n');
    for s in samples {
        assert_eq!(s.len(), num_vars, "sample length differs from header");
        out.extend(s.values().iter().map(|v| v.as_char()));
        out.push('\n');
    }
    out
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&crate::read_file(path)?)
}

pub fn write_dataset(path: &Path, num_vars: usize, samples: &[Evidence]) -> Result<()> {
    crate::write_file(path, &dataset_to_string(num_vars, samples))
}
