//! Ground-truth sidecar:
//!
//! ```text
//! TRUTH 1
//! rows <n 1-based labels>
//! cols <m 1-based labels>
//! ```

pub struct Truth {
    /// 0-based labels.
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

pub fn serialize(rows: &[usize], cols: &[usize]) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|l| (l + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!("TRUTH 1\nrows {}\ncols {}\n", join(rows), join(cols))
}

pub fn parse(text: &str) -> Result<Truth, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("TRUTH 1") => {}
        other => return Err(format!("expected header \"TRUTH 1\", found {other:?}")),
    }
    let mut labels = |key: &str| -> Result<Vec<usize>, String> {
        let line = lines
            .next()
            .ok_or_else(|| format!("missing \"{key}\" line"))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(format!("expected \"{key} ...\", found {line:?}"));
        }
        toks.map(|t| match t.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(l - 1),
            _ => Err(format!("bad label {t:?} in \"{key}\" line")),
        })
        .collect()
    };
    let rows = labels("rows")?;
    let cols = labels("cols")?;
    Ok(Truth { rows, cols })
}
