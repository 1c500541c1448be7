use std::io::{self, BufRead, Write};

/// One row of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub k: usize,
    pub alpha: f64,
    pub b_avg: f64,
    pub kappa: f64,
    /// Training success of the weights this iteration started from.
    pub training_success: f64,
    pub training_states: usize,
    pub reconsidered: bool,
    pub reverted: Vec<usize>,
    /// Locked indices after this iteration.
    pub locked: Vec<usize>,
    /// Weights after this iteration.
    pub weights: Vec<f64>,
}

pub const RUN_LOG_HEADER: &str = "# relavi run-log v1";
const COLUMNS: &str =
    "k,alpha,b_avg,kappa,training_success,training_states,reconsidered,reverted,locked_indices,weights";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| x.parse().map_err(|_| format!("bad list element `{x}`")))
        .collect()
}

/// Comma-separated, list fields joined with `;`. Floats use the shortest
/// round-tripping form.
pub fn write_run_log<W: Write>(rows: &[IterationLog], mut w: W) -> io::Result<()> {
    writeln!(w, "{RUN_LOG_HEADER}")?;
    writeln!(w, "{COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{},{},{},{},{}",
            r.k,
            r.alpha,
            r.b_avg,
            r.kappa,
            r.training_success,
            r.training_states,
            u8::from(r.reconsidered),
            join(&r.reverted),
            join(&r.locked),
            r.weights
                .iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(";"),
        )?;
    }
    Ok(())
}

pub fn read_run_log<R: BufRead>(r: R) -> Result<Vec<IterationLog>, String> {
    let mut rows = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if n == 0 {
            if line != RUN_LOG_HEADER {
                return Err(format!("unexpected run-log header `{line}`"));
            }
            continue;
        }
        if n == 1 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(format!(
                "line {}: expected 10 fields, found {}",
                n + 1,
                f.len()
            ));
        }
        let num = |i: usize| -> Result<f64, String> {
            f[i].parse()
                .map_err(|_| format!("line {}: bad number `{}`", n + 1, f[i]))
        };
        rows.push(IterationLog {
            k: f[0].parse().map_err(|_| format!("line {}: bad k", n + 1))?,
            alpha: num(1)?,
            b_avg: num(2)?,
            kappa: num(3)?,
            training_success: num(4)?,
            training_states: f[5]
                .parse()
                .map_err(|_| format!("line {}: bad count", n + 1))?,
            reconsidered: f[6] == "1",
            reverted: split(f[7])?,
            locked: split(f[8])?,
            weights: split(f[9])?,
        });
    }
    Ok(rows)
}
