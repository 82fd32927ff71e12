//! The alist sparse-matrix format: `n m`, max column/row degree, the column
//! and row degree lists, then one 1-indexed adjacency line per column and per
//! row. Zero entries are padding and ignored. Blank lines are skipped.

use std::fmt::Write as _;

use crate::code::CodeSpec;
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as (1-based line number, integers).
    fn next(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        for (i, text) in self.inner.by_ref() {
            let line = i + 1;
            if text.trim().is_empty() {
                continue;
            }
            let nums = text
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| Error::Parse { line, msg: format!("bad integer {t:?}") }))
                .collect::<Result<Vec<_>>>()?;
            return Ok((line, nums));
        }
        Err(Error::Parse { line: 0, msg: format!("unexpected end of input, expected {what}") })
    }

    fn exact(&mut self, what: &str, len: usize) -> Result<(usize, Vec<usize>)> {
        let (line, nums) = self.next(what)?;
        if nums.len() != len {
            return Err(Error::Parse { line, msg: format!("{what}: expected {len} values, got {}", nums.len()) });
        }
        Ok((line, nums))
    }
}

fn adjacency(lines: &mut Lines, count: usize, other: usize, degrees: &[usize], what: &str) -> Result<Vec<Vec<usize>>> {
    (0..count)
        .map(|i| {
            let (line, nums) = lines.next(what)?;
            let list: Vec<usize> = nums.into_iter().filter(|&x| x != 0).collect();
            if let Some(&bad) = list.iter().find(|&&x| x > other) {
                return Err(Error::Parse { line, msg: format!("index {bad} out of range 1..={other}") });
            }
            if list.len() != degrees[i] {
                return Err(Error::InconsistentDegrees(format!(
                    "{what} {} has {} entries but degree {}",
                    i + 1,
                    list.len(),
                    degrees[i]
                )));
            }
            Ok(list.into_iter().map(|x| x - 1).collect())
        })
        .collect()
}

pub fn load_alist(text: &str) -> Result<CodeSpec> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (line, head) = lines.exact("header", 2)?;
    let (n, m) = (head[0], head[1]);
    if n == 0 || m == 0 {
        return Err(Error::Parse { line, msg: "n and m must be positive".into() });
    }
    let (_, max) = lines.exact("max degrees", 2)?;
    let (_, col_deg) = lines.exact("column degrees", n)?;
    let (_, row_deg) = lines.exact("row degrees", m)?;
    if col_deg.iter().any(|&d| d > max[0]) || row_deg.iter().any(|&d| d > max[1]) {
        return Err(Error::InconsistentDegrees("a degree exceeds the declared maximum".into()));
    }
    if col_deg.iter().sum::<usize>() != row_deg.iter().sum::<usize>() {
        return Err(Error::InconsistentDegrees("column and row degrees count different edges".into()));
    }
    let cols = adjacency(&mut lines, n, m, &col_deg, "column")?;
    let rows = adjacency(&mut lines, m, n, &row_deg, "row")?;

    let mut from_cols: Vec<(usize, usize)> = cols.iter().enumerate().flat_map(|(v, cs)| cs.iter().map(move |&c| (c, v))).collect();
    let mut from_rows: Vec<(usize, usize)> = rows.iter().enumerate().flat_map(|(c, vs)| vs.iter().map(move |&v| (c, v))).collect();
    from_cols.sort_unstable();
    from_rows.sort_unstable();
    if from_cols != from_rows {
        return Err(Error::InconsistentDegrees("column and row adjacency lists disagree".into()));
    }
    CodeSpec::from_checks(n, rows)
}

/// Emits the code in alist form, zero-padding every list to the maximum degree.
pub fn to_alist(code: &CodeSpec) -> String {
    let vars = code.vars();
    let checks = code.checks();
    let max_col = vars.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = checks.iter().map(Vec::len).max().unwrap_or(0);
    let join = |xs: &mut dyn Iterator<Item = usize>| xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let padded = |list: &[usize], width: usize| {
        let mut it = list.iter().map(|x| x + 1).chain(std::iter::repeat(0)).take(width);
        join(&mut it)
    };
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", code.n(), code.m());
    let _ = writeln!(out, "{max_col} {max_row}");
    let _ = writeln!(out, "{}", join(&mut vars.iter().map(Vec::len)));
    let _ = writeln!(out, "{}", join(&mut checks.iter().map(Vec::len)));
    for list in vars {
        let _ = writeln!(out, "{}", padded(list, max_col));
    }
    for list in checks {
        let _ = writeln!(out, "{}", padded(list, max_row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "6 3\n2 3\n2 2 2 1 1 1\n3 3 3\n1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n1 2 4\n2 3 5\n1 3 6\n";

    #[test]
    fn parses_toy_code() {
        let code = load_alist(TOY).unwrap();
        assert_eq!((code.n(), code.m(), code.k()), (6, 3, 3));
        assert_eq!(code.checks()[1], vec![1, 2, 4]);
    }

    #[test]
    fn round_trips() {
        let code = load_alist(TOY).unwrap();
        let text = to_alist(&code);
        assert_eq!(text, TOY);
        assert_eq!(load_alist(&text).unwrap(), code);
    }

    #[test]
    fn reports_the_offending_line() {
        let bad = TOY.replace("1 2\n2 3\n", "1 x\n2 3\n");
        assert_eq!(load_alist(&bad).unwrap_err(), Error::Parse { line: 6, msg: "bad integer \"x\"".into() });
        let short = "6 3\n2 3\n2 2 2 1 1\n";
        assert!(matches!(load_alist(short), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(load_alist("6 3\n"), Err(Error::Parse { line: 0, .. })));
        let range = TOY.replace("1 3\n1 2\n", "1 9\n1 2\n");
        assert!(matches!(load_alist(&range), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn rejects_mismatched_lists() {
        // Column 1 claims checks 1 and 3, but row 3 no longer lists variable 1.
        let bad = TOY.replace("1 3 6\n", "2 3 6\n");
        assert!(matches!(load_alist(&bad), Err(Error::InconsistentDegrees(_))));
        let degree = TOY.replace("1 0\n2 0\n3 0\n", "1 2\n2 0\n3 0\n");
        assert!(matches!(load_alist(&degree), Err(Error::InconsistentDegrees(_))));
    }
}
