//! CSV output and the multipoint node table.

use std::fmt::Write as _;

use mpbvp::boundary::MultipointBoundaryOperator;
use mpbvp::linalg::CMatrix;
use num_complex::Complex64;

use crate::CliError;

/// 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn row(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

pub const NODE_HEADER: &str = "k,node,t,level,row,col,re,im\n";

/// Appends the nonzero coefficients `beta^{j,l}` of `bk` to `out`.
pub fn dump_nodes(out: &mut String, k: usize, bk: &MultipointBoundaryOperator) {
    for (j, &t) in bk.nodes().iter().enumerate() {
        for l in 0..=bk.n() {
            let beta = bk.beta(j, l);
            for r in 0..beta.nrows() {
                for c in 0..beta.ncols() {
                    let z = beta[(r, c)];
                    if z != Complex64::new(0.0, 0.0) {
                        let _ = writeln!(out, "{k},{j},{},{l},{r},{c},{},{}", num(t), num(z.re), num(z.im));
                    }
                }
            }
        }
    }
}

/// Rebuilds the operator with index `k` from a node table.
pub fn parse_node_table(
    text: &str,
    k: usize,
    n: usize,
    r: usize,
    m: usize,
    domain: (f64, f64),
) -> Result<MultipointBoundaryOperator, CliError> {
    let mut nodes: Vec<(usize, f64)> = Vec::new();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| CliError::Parse(format!("node table line {}: {what}", lineno + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer {s:?}")));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        if int(f[0])? != k {
            continue;
        }
        let (j, t, l, row, col) = (int(f[1])?, real(f[2])?, int(f[3])?, int(f[4])?, int(f[5])?);
        if l > n || row >= r * m || col >= m {
            return Err(bad("level, row or column out of range"));
        }
        match nodes.iter().find(|(idx, _)| *idx == j) {
            Some(&(_, t0)) if t0 != t => return Err(bad("node position changes between lines")),
            Some(_) => {}
            None => nodes.push((j, t)),
        }
        entries.push((j, l, row, col, Complex64::new(real(f[6])?, real(f[7])?)));
    }
    if nodes.is_empty() {
        return Err(CliError::Parse(format!("node table has no rows for k = {k}")));
    }
    nodes.sort_by_key(|&(j, _)| j);
    let mut betas = vec![vec![CMatrix::zeros(r * m, m); n + 1]; nodes.len()];
    for (j, l, row, col, z) in entries {
        let pos = nodes.iter().position(|&(idx, _)| idx == j).expect("node registered");
        betas[pos][l][(row, col)] = z;
    }
    let ts = nodes.into_iter().map(|(_, t)| t).collect();
    MultipointBoundaryOperator::new(n, r, m, domain, ts, betas).map_err(|e| CliError::Parse(format!("node table: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn node_table_round_trip() {
        let z = |re: f64, im: f64| Complex64::new(re, im);
        let mut b0 = vec![CMatrix::zeros(2, 1); 3];
        b0[0][(0, 0)] = z(1.0, 0.0);
        b0[1][(1, 0)] = z(0.5, -0.25);
        let mut b1 = vec![CMatrix::zeros(2, 1); 3];
        b1[2][(1, 0)] = z(1.0 / 3.0, 0.0);
        let op = MultipointBoundaryOperator::new(2, 2, 1, (0.0, 1.0), vec![0.0, 0.7], vec![b0, b1]).unwrap();
        let mut table = String::from(NODE_HEADER);
        dump_nodes(&mut table, 4, &op);
        dump_nodes(&mut table, 5, &op);
        let back = parse_node_table(&table, 4, 2, 2, 1, (0.0, 1.0)).unwrap();
        assert_eq!(back, op);
        assert!(parse_node_table(&table, 6, 2, 2, 1, (0.0, 1.0)).is_err());
        assert!(parse_node_table(&table, 4, 1, 2, 1, (0.0, 1.0)).is_err());
        let broken = table.replacen("4,1,", "4,1,x", 1);
        assert!(parse_node_table(&broken, 4, 2, 2, 1, (0.0, 1.0)).is_err());
    }
}
