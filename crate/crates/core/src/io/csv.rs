use std::io::{BufRead, Write};

use crate::chaos::ChaosReport;
use crate::dist::{EmpiricalMeasure, ProbabilityVector};
use crate::entropy::DiagnosticRow;
use crate::error::{Error, Result};
use crate::mean_field::Trajectory;
use crate::sim::Event;

pub const TRAJECTORY_HEADER: &str = "t,H,D,r_bar,mass_defect,mean_defect";
pub const SNAPSHOTS_HEADER: &str = "t,n,p_n";
pub const DIAGNOSTICS_HEADER: &str =
    "t,H,D,pillar_ratio,thm1_ratio,thm2_ratio,exp_moment,B1,B2,H_int";
pub const SIM_SNAPSHOTS_HEADER: &str = "t,n,count,q_n";
pub const EVENTS_HEADER: &str = "time,giver,receiver";
pub const CHAOS_HEADER: &str = "t,l1_sq_mean,l1_sq_se,entropic_mean,entropic_se,infinite_count";

/// Snapshot rows are written only for `p_n` above this.
pub const SPARSE_FLOOR: f64 = 1e-300;

/// 17 significant digits: parses back to the same `f64`.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_finite() {
            write!(f, "{:.16e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn row(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for &v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        write!(w, "{}", Num(v))?;
    }
    w.write_all(b"\n")
}

pub fn write_trajectory(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (&t, o) in traj.times.iter().zip(&traj.observables) {
        row(
            &mut w,
            &[t, o.h, o.d, o.r_bar, o.mass_defect, o.mean_defect],
        )?;
    }
    Ok(())
}

/// Requires stored snapshots.
pub fn write_snapshots(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    if traj.snapshots.len() != traj.len() {
        return Err(Error::InvalidParams(
            "trajectory was integrated without snapshots".into(),
        ));
    }
    writeln!(w, "{SNAPSHOTS_HEADER}")?;
    for (&t, p) in traj.times.iter().zip(&traj.snapshots) {
        for (n, &v) in p.iter().enumerate().filter(|(_, &v)| v > SPARSE_FLOOR) {
            writeln!(w, "{},{n},{}", Num(t), Num(v))?;
        }
    }
    Ok(())
}

pub fn write_diagnostics(mut w: impl Write, rows: &[DiagnosticRow]) -> Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        row(
            &mut w,
            &[
                r.t,
                r.h,
                r.d,
                r.pillar_ratio,
                r.thm1_ratio,
                r.thm2_ratio,
                r.exp_moment,
                r.b1,
                r.b2,
                r.h_int,
            ],
        )?;
    }
    Ok(())
}

/// One row per occupied level per sample time.
pub fn write_sim_snapshots(mut w: impl Write, samples: &[(f64, EmpiricalMeasure)]) -> Result<()> {
    writeln!(w, "{SIM_SNAPSHOTS_HEADER}")?;
    for (t, q) in samples {
        for (n, count) in q.iter() {
            writeln!(w, "{},{n},{count},{}", Num(*t), Num(q.q(n)))?;
        }
    }
    Ok(())
}

pub fn write_events(mut w: impl Write, events: &[Event]) -> Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(w, "{},{},{}", Num(e.time), e.giver, e.receiver)?;
    }
    Ok(())
}

pub fn write_chaos(mut w: impl Write, report: &ChaosReport) -> Result<()> {
    writeln!(w, "{CHAOS_HEADER}")?;
    for ((&t, l1), ent) in report.times.iter().zip(&report.l1_sq).zip(&report.entropic) {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            Num(t),
            Num(l1.mean),
            Num(l1.se),
            Num(ent.mean),
            Num(ent.se),
            ent.n_infinite
        )?;
    }
    Ok(())
}

/// A parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    }
}

/// Reads a header line and rows of numbers. Blank lines are skipped.
pub fn read_table(r: impl BufRead) -> Result<Table> {
    let mut lines = r.lines().enumerate();
    let columns: Vec<String> = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line.split(',').map(|c| c.trim().to_string()).collect();
                }
            }
            None => return Err(Error::Parse("empty file".into())),
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        if values.len() != columns.len() {
            return Err(Error::Parse(format!(
                "line {}: {} fields, header has {}",
                i + 1,
                values.len(),
                columns.len()
            )));
        }
        rows.push(values);
    }
    Ok(Table { columns, rows })
}

/// `(t, H)` pairs from a trajectory file.
pub fn read_entropy_series(r: impl BufRead) -> Result<Vec<(f64, f64)>> {
    let table = read_table(r)?;
    let (t, h) = (table.column("t")?, table.column("H")?);
    Ok(table.rows.iter().map(|row| (row[t], row[h])).collect())
}

fn level(value: f64, n_max: usize) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 {
        return Err(Error::Parse(format!(
            "level {value} is not a non-negative integer"
        )));
    }
    let n = value as usize;
    if n > n_max {
        return Err(Error::LevelOverflow { level: n, n_max });
    }
    Ok(n)
}

/// Dense laws from a sparse `t,n,p_n` file, padded to `n_max`.
pub fn read_snapshots(r: impl BufRead, n_max: usize) -> Result<(Vec<f64>, Vec<ProbabilityVector>)> {
    let table = read_table(r)?;
    let (tc, nc, pc) = (table.column("t")?, table.column("n")?, table.column("p_n")?);
    let mut times: Vec<f64> = Vec::new();
    let mut dense: Vec<Vec<f64>> = Vec::new();
    for row in &table.rows {
        if times.last() != Some(&row[tc]) {
            times.push(row[tc]);
            dense.push(vec![0.0; n_max + 1]);
        }
        let n = level(row[nc], n_max)?;
        dense.last_mut().expect("pushed above")[n] = row[pc];
    }
    let laws = dense
        .into_iter()
        .map(ProbabilityVector::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((times, laws))
}

/// A single law from `n,p_n`, or the first sample of a `t,n,p_n` file.
pub fn read_law(r: impl BufRead, n_max: usize) -> Result<ProbabilityVector> {
    let table = read_table(r)?;
    let (nc, pc) = (table.column("n")?, table.column("p_n")?);
    let first_t = table
        .column("t")
        .ok()
        .and_then(|tc| table.rows.first().map(|row| (tc, row[tc])));
    let mut p = vec![0.0; n_max + 1];
    for row in &table.rows {
        if let Some((tc, t0)) = first_t {
            if row[tc] != t0 {
                break;
            }
        }
        p[level(row[nc], n_max)?] = row[pc];
    }
    ProbabilityVector::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean_field::{integrate_datum, InitialDatum, OdeConfig};

    fn traj() -> Trajectory {
        integrate_datum(InitialDatum::Dirac { mu: 3 }, &OdeConfig::new(2.0, 150)).unwrap()
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -2.5e-17] {
            assert_eq!(Num(v).to_string().parse::<f64>().unwrap(), v);
        }
        assert_eq!(Num(f64::INFINITY).to_string(), "inf");
        assert!(Num(f64::NAN).to_string().parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn trajectory_round_trip() {
        let tr = traj();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,H,D,r_bar,mass_defect,mean_defect\n"));
        assert_eq!(
            read_entropy_series(buf.as_slice()).unwrap(),
            tr.entropy_series()
        );
    }

    #[test]
    fn snapshots_round_trip() {
        let tr = traj();
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &tr).unwrap();
        let (times, laws) = read_snapshots(buf.as_slice(), 150).unwrap();
        assert_eq!(times, tr.times);
        assert_eq!(laws, tr.snapshots);
        let first = read_law(buf.as_slice(), 150).unwrap();
        assert_eq!(first, tr.snapshots[0]);
        // The dirac initial law has a single row.
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().nth(1).unwrap(),
            "0.0000000000000000e0,3,1.0000000000000000e0"
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_table("".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(
            read_table("a,b\n1,x\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_table("a,b\n1\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_law("n,p_n\n7,1\n".as_bytes(), 5),
            Err(Error::LevelOverflow { level: 7, n_max: 5 })
        ));
        assert!(matches!(
            read_law("n,p_n\n0,0.5\n".as_bytes(), 5),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(read_entropy_series("t,D\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn event_and_histogram_rows() {
        let q = EmpiricalMeasure::from_dollars(&[0, 2, 2, 0]);
        let mut buf = Vec::new();
        write_sim_snapshots(&mut buf, &[(1.5, q)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,n,count,q_n\n1.5000000000000000e0,0,2,5.0000000000000000e-1\n1.5000000000000000e0,2,2,5.0000000000000000e-1\n"
        );
        let e = Event {
            time: 0.25,
            time_delta: 0.25,
            giver: 3,
            receiver: 0,
        };
        let mut buf = Vec::new();
        write_events(&mut buf, &[e]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,giver,receiver\n2.5000000000000000e-1,3,0\n"
        );
    }
}
