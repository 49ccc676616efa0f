//! Error metrics and the results table.

use std::io::Write;

use crate::error::{check_len, Error, Result};
use crate::fom::EnergyTrace;
use crate::rom::Variant;
use crate::scalar::Real;

fn sum_sq<T: Real>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |acc, x| acc + x * x)
}

fn check_shapes<T>(numeric: &[Vec<T>], exact: &[Vec<T>]) -> Result<()> {
    check_len(exact.len(), numeric.len())?;
    for (a, b) in numeric.iter().zip(exact) {
        check_len(b.len(), a.len())?;
    }
    Ok(())
}

/// `‖Z_h − Z_e‖_F / ‖Z_e‖_F` over all recorded states. Components of a
/// state are stacked, so for two-component models this is the error of the
/// stacked `(p, q)` matrix.
pub fn e_sol<T: Real>(numeric: &[Vec<T>], exact: &[Vec<T>]) -> Result<T> {
    check_shapes(numeric, exact)?;
    let num = sum_sq(numeric.iter().zip(exact).flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y)));
    let den = sum_sq(exact.iter().flatten().copied());
    if den == T::zero() {
        return Err(Error::ZeroReference("exact trajectory"));
    }
    Ok((num / den).sqrt())
}

/// Pointwise modulus `sqrt(Σ_c z_c²)` of a component-blocked state.
pub fn modulus<T: Real>(state: &[T], components: usize) -> Vec<T> {
    let n = state.len() / components;
    (0..n).map(|j| sum_sq((0..components).map(|c| state[c * n + j])).sqrt()).collect()
}

/// [`e_sol`] of the pointwise modulus. For the Schrödinger cases this is the
/// error of `|ψ|`, which does not see a global phase drift.
pub fn e_sol_modulus<T: Real>(numeric: &[Vec<T>], exact: &[Vec<T>], components: usize) -> Result<T> {
    check_shapes(numeric, exact)?;
    if components == 0 {
        return Err(Error::InvalidParameter("component count must be positive".into()));
    }
    let a: Vec<_> = numeric.iter().map(|s| modulus(s, components)).collect();
    let b: Vec<_> = exact.iter().map(|s| modulus(s, components)).collect();
    e_sol(&a, &b)
}

/// `min_k ‖z_final − z_exact(t_k)‖² / ‖reference‖²` over `k = 0..=steps`.
/// Returns the minimum and the index where it is attained.
pub fn e_shape<T: Real>(
    z_final: &[T],
    mut exact: impl FnMut(usize) -> Vec<T>,
    steps: usize,
    reference: &[T],
) -> Result<(T, usize)> {
    check_len(reference.len(), z_final.len())?;
    let den = sum_sq(reference.iter().copied());
    if den == T::zero() {
        return Err(Error::ZeroReference("shape reference"));
    }
    let mut best = (T::max_value().unwrap_or(T::one()), 0);
    for k in 0..=steps {
        let e = exact(k);
        check_len(z_final.len(), e.len())?;
        let d = sum_sq(z_final.iter().zip(&e).map(|(&a, &b)| a - b)) / den;
        if d < best.0 {
            best = (d, k);
        }
    }
    Ok(best)
}

/// `max_k |ε^k − ε^0| / |ε^0|`.
pub fn e_energy<T: Real>(trace: &EnergyTrace<T>) -> Result<T> {
    let d = energy_drift(trace)?;
    if d.relative {
        Ok(d.value)
    } else {
        Err(Error::ZeroReference("initial energy"))
    }
}

/// `max_k |ε^k − ε_ref| / |ε_ref|` against an external reference, e.g. the
/// full-order energy of the initial data for a reduced run.
pub fn e_energy_against<T: Real>(trace: &EnergyTrace<T>, reference: T) -> Result<T> {
    if trace.values.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if reference == T::zero() {
        return Err(Error::ZeroReference("reference energy"));
    }
    Ok(trace.values.iter().fold(T::zero(), |m, &e| m.max((e - reference).abs())) / reference.abs())
}

/// Energy drift that falls back to the absolute value when `ε^0 = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyDrift<T> {
    pub value: T,
    pub relative: bool,
}

pub fn energy_drift<T: Real>(trace: &EnergyTrace<T>) -> Result<EnergyDrift<T>> {
    let e0 = *trace.values.first().ok_or(Error::EmptyTrajectory)?;
    let abs = trace.values.iter().fold(T::zero(), |m, &e| m.max((e - e0).abs()));
    if e0 == T::zero() {
        Ok(EnergyDrift { value: abs, relative: false })
    } else {
        Ok(EnergyDrift { value: abs / e0.abs(), relative: true })
    }
}

/// Largest step-to-step change `max_k |ε^{k+1} − ε^k| / |ε^0|`.
pub fn max_step_drift<T: Real>(trace: &EnergyTrace<T>) -> Result<T> {
    let e0 = *trace.values.first().ok_or(Error::EmptyTrajectory)?;
    if e0 == T::zero() {
        return Err(Error::ZeroReference("initial energy"));
    }
    Ok(trace.values.windows(2).fold(T::zero(), |m, w| m.max((w[1] - w[0]).abs())) / e0.abs())
}

/// Least-squares slope of the trace against the step index, relative to `|ε^0|`.
pub fn drift_slope<T: Real>(trace: &EnergyTrace<T>) -> Result<T> {
    let n = trace.values.len();
    if n < 2 {
        return Err(Error::EmptyTrajectory);
    }
    let e0 = trace.values[0];
    if e0 == T::zero() {
        return Err(Error::ZeroReference("initial energy"));
    }
    let mean_k = T::count(n - 1) / T::lit(2.0);
    let mean_e = trace.values.iter().fold(T::zero(), |a, &e| a + e) / T::count(n);
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (k, &e) in trace.values.iter().enumerate() {
        let dk = T::count(k) - mean_k;
        sxy += dk * (e - mean_e);
        sxx += dk * dk;
    }
    Ok(sxy / sxx / e0.abs())
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub model: String,
    pub variant: Variant,
    pub n: usize,
    pub ntilde: usize,
    pub e_sol: f64,
    /// Not every case reports a shape error.
    pub e_shape: Option<f64>,
    pub e_energy: f64,
    pub wall_clock: f64,
    pub speedup: f64,
}

impl ErrorReport {
    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        ok(self.e_sol) && self.e_shape.is_none_or(ok) && ok(self.e_energy) && ok(self.wall_clock) && ok(self.speedup)
    }
}

pub const REPORT_HEADER: &str = "model,variant,n,ntilde,e_sol,e_shape,e_energy,wall_clock_s,speedup";

/// Scientific notation with seven significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

pub fn write_report_csv<W: Write>(mut w: W, rows: &[ErrorReport]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.variant,
            r.n,
            r.ntilde,
            sci(r.e_sol),
            r.e_shape.map(sci).unwrap_or_default(),
            sci(r.e_energy),
            sci(r.wall_clock),
            sci(r.speedup)
        )?;
    }
    Ok(())
}

/// `index,sigma,ratio` rows of a singular-value decay.
pub fn write_decay_csv<W: Write, T: Real>(mut w: W, sigma: &[T]) -> Result<()> {
    writeln!(w, "index,sigma,ratio")?;
    let s1 = sigma.first().map_or(1.0, |s| s.as_f64());
    for (i, s) in sigma.iter().enumerate() {
        let s = s.as_f64();
        writeln!(w, "{},{},{}", i + 1, sci(s), sci(s / s1))?;
    }
    Ok(())
}

/// `t,energy` rows.
pub fn write_energy_csv<W: Write, T: Real>(mut w: W, trace: &EnergyTrace<T>) -> Result<()> {
    writeln!(w, "t,energy")?;
    for (t, e) in trace.times.iter().zip(&trace.values) {
        writeln!(w, "{},{}", sci(t.as_f64()), sci(e.as_f64()))?;
    }
    Ok(())
}

/// Node coordinates followed by one column per named field.
pub fn write_profile_csv<W: Write, T: Real>(
    mut w: W,
    nodes: &[(T, T)],
    two_d: bool,
    fields: &[(&str, &[T])],
) -> Result<()> {
    for (_, f) in fields {
        check_len(nodes.len(), f.len())?;
    }
    let mut header = String::from(if two_d { "x,y" } else { "x" });
    for (name, _) in fields {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}")?;
    for (j, &(x, y)) in nodes.iter().enumerate() {
        let mut line = sci(x.as_f64());
        if two_d {
            line.push(',');
            line.push_str(&sci(y.as_f64()));
        }
        for (_, f) in fields {
            line.push(',');
            line.push_str(&sci(f[j].as_f64()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> Vec<Vec<f64>> {
        (0..4).map(|k| (0..6).map(|i| ((i + k) as f64 * 0.7).sin()).collect()).collect()
    }

    #[test]
    fn e_sol_trivial_values() {
        let ze = traj();
        assert_eq!(e_sol(&ze, &ze).unwrap(), 0.0);
        let twice: Vec<Vec<f64>> = ze.iter().map(|s| s.iter().map(|x| 2.0 * x).collect()).collect();
        assert!((e_sol(&twice, &ze).unwrap() - 1.0).abs() < 1e-15);
        let zero = vec![vec![0.0; 6]; 4];
        assert!(matches!(e_sol(&ze, &zero), Err(Error::ZeroReference(_))));
        assert!(e_sol(&ze[..3], &ze).is_err());
    }

    #[test]
    fn modulus_ignores_phase() {
        let exact: Vec<Vec<f64>> = vec![vec![1.0, 2.0, 0.0, 0.0]];
        let rotated = vec![vec![0.0, 0.0, 1.0, -2.0]];
        assert_eq!(e_sol_modulus(&rotated, &exact, 2).unwrap(), 0.0);
        assert!(e_sol(&rotated, &exact).unwrap() > 1.0);
    }

    #[test]
    fn e_shape_picks_the_lag() {
        let exact = |k: usize| -> Vec<f64> { (0..8).map(|i| ((i as f64) - 0.3 * k as f64).cos()).collect() };
        let (v, k) = e_shape(&exact(10), exact, 10, &exact(10)).unwrap();
        assert_eq!((v, k), (0.0, 10));
        let (v, k) = e_shape(&exact(5), exact, 10, &exact(10)).unwrap();
        assert_eq!((v, k), (0.0, 5));
        assert!(e_shape(&exact(5), exact, 10, &[0.0; 8]).is_err());
    }

    #[test]
    fn e_energy_values() {
        let tr = |v: Vec<f64>| EnergyTrace { times: (0..v.len()).map(|k| k as f64).collect(), values: v };
        assert_eq!(e_energy(&tr(vec![2.0; 5])).unwrap(), 0.0);
        assert!((e_energy(&tr(vec![1.0, 1.01, 0.99])).unwrap() - 0.01).abs() < 1e-15);
        assert!(e_energy(&tr(vec![0.0, 1e-3])).is_err());
        let d = energy_drift(&tr(vec![0.0, 1e-3])).unwrap();
        assert!(!d.relative && d.value == 1e-3);
        assert!((e_energy_against(&tr(vec![1.0, 1.01]), 0.5).unwrap() - 1.02).abs() < 1e-15);
        assert!(e_energy_against(&tr(vec![1.0]), 0.0).is_err());
        assert!((drift_slope(&tr(vec![1.0, 1.1, 1.2])).unwrap() - 0.1).abs() < 1e-14);
        assert!((max_step_drift(&tr(vec![1.0, 1.1, 1.15])).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn report_csv_format() {
        let r = ErrorReport {
            model: "kdv".into(),
            variant: Variant::PdRom,
            n: 40,
            ntilde: 45,
            e_sol: 5.62e-3,
            e_shape: None,
            e_energy: 9.9e-5,
            wall_clock: 0.25,
            speedup: 36.0,
        };
        assert!(r.is_valid());
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[r]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines[1], "kdv,PD-ROM,40,45,5.620000e-3,,9.900000e-5,2.500000e-1,3.600000e1");
    }
}
