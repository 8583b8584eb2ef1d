//! The estimator hierarchy for escape rates: per-hole spectral rates, the
//! measure-weighted average, the convexity lower bound, the naive
//! estimates N1 and N2, and the inequality verdicts relating them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::MeasureVector;
use crate::spectral::leading_eigenvalue;
use crate::transition::SubstochasticMatrix;

/// Slack for the inequality verdicts, absorbing eigensolve roundoff.
pub const VERDICT_SLACK: f64 = 1e-12;

/// Eigenvalues this far outside [0,1] are treated as roundoff dust.
const EIGENVALUE_DUST: f64 = 1e-12;

/// Serialization of reals that may be infinite: JSON has no Infinity
/// literal, so those serialize as the string "inf".
mod real {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a real number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<f64, E> {
                Ok(x)
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_str<E: de::Error>(self, t: &str) -> std::result::Result<f64, E> {
                t.parse().map_err(|_| E::custom(format!("not a real number: {t:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

/// Survival factor and escape rate of the system opened at one hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleRate {
    pub hole_index: usize,
    /// Leading eigenvalue of the punched matrix: survival per iteration.
    pub p: f64,
    /// Escape rate in nats per iteration; infinite when nothing survives.
    #[serde(with = "real")]
    pub rho: f64,
}

/// All estimators for one closed system evaluated together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub hole_rates: Vec<HoleRate>,
    /// Measure-weighted average of the per-hole rates.
    #[serde(with = "real")]
    pub average_rho: f64,
    /// −ln Σ μ(Eᵢ) pᵢ, the convexity bound below the average.
    #[serde(with = "real")]
    pub lower_bound: f64,
    /// −ln(1 − 1/k): escape rate of a memoryless hole of average size.
    #[serde(with = "real")]
    pub n1: f64,
    /// −Σ hᵢ ln(1 − hᵢ): the size-weighted memoryless estimate.
    #[serde(with = "real")]
    pub n2: f64,
    pub jensen_holds: bool,
    pub n2_ge_n1_holds: bool,
}

/// Maps a survival factor to an escape rate: ρ = −ln λ, with λ = 0 giving
/// infinite rate. Values within roundoff dust of the ends are clamped.
pub fn escape_rate_from_eigenvalue(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < -EIGENVALUE_DUST || lambda > 1.0 + EIGENVALUE_DUST {
        return Err(Error::Domain(format!("survival factor {lambda} outside [0, 1]")));
    }
    let lambda = lambda.clamp(0.0, 1.0);
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    let rho = -lambda.ln();
    // -ln(1) is -0.0; keep rates sign-clean.
    Ok(if rho == 0.0 { 0.0 } else { rho })
}

/// Opens the closed chain at every hole in turn and solves each punched
/// matrix for its survival factor. Holes are independent, so the solves
/// run in parallel; the output order is the cell order.
pub fn per_hole_rates(matrix: &SubstochasticMatrix, tol: f64) -> Result<Vec<HoleRate>> {
    if !matrix.is_stochastic() {
        return Err(Error::Domain(
            "per-hole rates need the closed (stochastic) chain".into(),
        ));
    }
    (0..matrix.order())
        .into_par_iter()
        .map(|hole| {
            let run = || -> Result<HoleRate> {
                let punched = matrix.punch_hole(hole)?;
                let solved = leading_eigenvalue(&punched, tol)?;
                Ok(HoleRate {
                    hole_index: hole,
                    p: solved.eigenvalue,
                    rho: escape_rate_from_eigenvalue(solved.eigenvalue)?,
                })
            };
            run().map_err(|e| Error::AtHole { hole, source: Box::new(e) })
        })
        .collect()
}

/// Σ μ(Eᵢ) ρᵢ. An infinite rate on a hole of positive measure makes the
/// average infinite; on a null hole it is ignored.
pub fn average_escape_rate(mu: &MeasureVector, rates: &[HoleRate]) -> Result<f64> {
    if mu.weights().len() != rates.len() {
        return Err(Error::DimensionMismatch { left: mu.weights().len(), right: rates.len() });
    }
    let mut sum = 0.0;
    for (w, r) in mu.weights().iter().zip(rates) {
        if *w == 0.0 {
            continue;
        }
        if r.rho.is_infinite() {
            return Ok(f64::INFINITY);
        }
        sum += w * r.rho;
    }
    Ok(sum)
}

/// −ln Σ μ(Eᵢ) pᵢ, infinite when no hole lets anything survive.
pub fn lower_bound_estimate(mu: &MeasureVector, rates: &[HoleRate]) -> Result<f64> {
    if mu.weights().len() != rates.len() {
        return Err(Error::DimensionMismatch { left: mu.weights().len(), right: rates.len() });
    }
    let sum: f64 = mu.weights().iter().zip(rates).map(|(w, r)| w * r.p).sum();
    if sum == 0.0 {
        return Ok(f64::INFINITY);
    }
    let bound = -sum.ln();
    Ok(if bound == 0.0 { 0.0 } else { bound })
}

/// −ln(1 − 1/k): the escape rate a memoryless system would have if every
/// hole had the average size 1/k.
pub fn naive_n1(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("naive estimate needs k >= 2 holes, got {k}")));
    }
    Ok(-(-1.0 / k as f64).ln_1p())
}

/// −Σ hᵢ ln(1 − hᵢ): the memoryless estimate aware of hole sizes.
/// Infinite when some hole fills the whole space.
pub fn naive_n2(mu: &MeasureVector) -> f64 {
    let mut sum = 0.0;
    for &h in mu.weights() {
        if h == 0.0 {
            continue;
        }
        if h >= 1.0 {
            return f64::INFINITY;
        }
        sum -= h * (-h).ln_1p();
    }
    sum
}

/// Runs the whole estimator hierarchy for one closed chain and measure.
pub fn build_report(
    matrix: &SubstochasticMatrix,
    mu: &MeasureVector,
    tol: f64,
) -> Result<EstimateReport> {
    if mu.weights().len() != matrix.order() {
        return Err(Error::DimensionMismatch {
            left: mu.weights().len(),
            right: matrix.order(),
        });
    }
    let hole_rates = per_hole_rates(matrix, tol)?;
    let average_rho = average_escape_rate(mu, &hole_rates)?;
    let lower_bound = lower_bound_estimate(mu, &hole_rates)?;
    let n1 = naive_n1(matrix.order())?;
    let n2 = naive_n2(mu);
    Ok(EstimateReport {
        hole_rates,
        average_rho,
        lower_bound,
        n1,
        n2,
        jensen_holds: average_rho >= lower_bound - VERDICT_SLACK,
        n2_ge_n1_holds: n2 >= n1 - VERDICT_SLACK,
    })
}

impl EstimateReport {
    /// CSV form: summary fields first, then one row per hole, full
    /// precision throughout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("field,value\n");
        out.push_str(&format!("average_rho,{:.16e}\n", self.average_rho));
        out.push_str(&format!("lower_bound,{:.16e}\n", self.lower_bound));
        out.push_str(&format!("n1,{:.16e}\n", self.n1));
        out.push_str(&format!("n2,{:.16e}\n", self.n2));
        out.push_str(&format!("jensen_holds,{}\n", self.jensen_holds));
        out.push_str(&format!("n2_ge_n1_holds,{}\n", self.n2_ge_n1_holds));
        out.push_str("hole,p,rho\n");
        for r in &self.hole_rates {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", r.hole_index, r.p, r.rho));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Domain(format!("report CSV: {msg}"));
        let mut lines = text.lines();
        if lines.next() != Some("field,value") {
            return Err(bad("missing field,value header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let (key, value) = line.split_once(',').ok_or_else(|| bad("malformed row"))?;
            if key != name {
                return Err(bad(&format!("expected field {name}, got {key}")));
            }
            Ok(value.to_string())
        };
        let parse_real = |v: String| -> Result<f64> {
            v.parse().map_err(|_| bad(&format!("bad real {v:?}")))
        };
        let parse_bool = |v: String| -> Result<bool> {
            v.parse().map_err(|_| bad(&format!("bad bool {v:?}")))
        };
        let average_rho = parse_real(field("average_rho")?)?;
        let lower_bound = parse_real(field("lower_bound")?)?;
        let n1 = parse_real(field("n1")?)?;
        let n2 = parse_real(field("n2")?)?;
        let jensen_holds = parse_bool(field("jensen_holds")?)?;
        let n2_ge_n1_holds = parse_bool(field("n2_ge_n1_holds")?)?;
        if lines.next() != Some("hole,p,rho") {
            return Err(bad("missing hole,p,rho header"));
        }
        let mut hole_rates = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let index = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad hole index"))?;
            let p = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad p"))?;
            let rho = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("bad rho"))?;
            hole_rates.push(HoleRate { hole_index: index, p, rho });
        }
        Ok(EstimateReport {
            hole_rates,
            average_rho,
            lower_bound,
            n1,
            n2,
            jensen_holds,
            n2_ge_n1_holds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_cat_map_model, make_skewed_tent};
    use crate::partition::lebesgue_measure;
    use crate::spectral::DEFAULT_SPECTRAL_TOL;
    use crate::transition::transition_matrix;

    fn tent_report(x0: f64) -> EstimateReport {
        let map = make_skewed_tent(x0).unwrap();
        let p = map.base_partition().clone();
        let matrix = transition_matrix(&map, &p).unwrap();
        let mu = lebesgue_measure(&p);
        build_report(&matrix, &mu, DEFAULT_SPECTRAL_TOL).unwrap()
    }

    #[test]
    fn rate_from_eigenvalue_ends_and_clamps() {
        assert_eq!(escape_rate_from_eigenvalue(1.0).unwrap(), 0.0);
        assert!(escape_rate_from_eigenvalue(1.0).unwrap().is_sign_positive());
        assert_eq!(escape_rate_from_eigenvalue(0.0).unwrap(), f64::INFINITY);
        assert!((escape_rate_from_eigenvalue(0.9).unwrap() - 0.1053605).abs() < 1e-7);
        assert_eq!(escape_rate_from_eigenvalue(-5e-13).unwrap(), f64::INFINITY);
        assert_eq!(escape_rate_from_eigenvalue(1.0 + 5e-13).unwrap(), 0.0);
        assert!(escape_rate_from_eigenvalue(-0.5).is_err());
        assert!(escape_rate_from_eigenvalue(1.5).is_err());
    }

    #[test]
    fn tent_base_rates() {
        let report = tent_report(0.3);
        let p: Vec<f64> = report.hole_rates.iter().map(|r| r.p).collect();
        assert!((p[0] - 0.7).abs() < 1e-12);
        assert!((p[1] - 0.3).abs() < 1e-12);
        assert!((report.hole_rates[0].rho - 0.356675).abs() < 1e-6);
        assert!((report.hole_rates[1].rho - 1.203973).abs() < 1e-6);
        let expect_avg = -0.3 * 0.7f64.ln() - 0.7 * 0.3f64.ln();
        assert!((report.average_rho - expect_avg).abs() < 1e-12);
        assert!((report.lower_bound - -(0.42f64.ln())).abs() < 1e-12);
        assert!(report.jensen_holds);
        assert!(report.n2_ge_n1_holds);
    }

    #[test]
    fn symmetric_tent_is_the_equality_case() {
        let report = tent_report(0.5);
        let ln2 = 2.0f64.ln();
        assert!((report.average_rho - ln2).abs() < 1e-12);
        assert!((report.lower_bound - ln2).abs() < 1e-12);
        assert!((report.n1 - ln2).abs() < 1e-15);
        assert!((report.n2 - ln2).abs() < 1e-15);
    }

    #[test]
    fn per_hole_rates_rejects_open_chains() {
        let map = make_skewed_tent(0.3).unwrap();
        let matrix = transition_matrix(&map, map.base_partition()).unwrap();
        let punched = matrix.punch_hole(0).unwrap();
        assert!(per_hole_rates(&punched, DEFAULT_SPECTRAL_TOL).is_err());
    }

    #[test]
    fn naive_estimates() {
        assert!((naive_n1(2).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        assert!((naive_n1(4).unwrap() - 0.2876820724517809).abs() < 1e-15);
        assert!(naive_n1(1).is_err());

        let uniform = MeasureVector::uniform(4).unwrap();
        assert!((naive_n2(&uniform) - naive_n1(4).unwrap()).abs() < 1e-15);
        let skew = MeasureVector::new(vec![0.3, 0.7]).unwrap();
        assert!((naive_n2(&skew) - 0.949784).abs() < 1e-6);
        let degenerate = MeasureVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(naive_n2(&degenerate), f64::INFINITY);
    }

    #[test]
    fn cat_model_report_matches_printed_values() {
        let cat = make_cat_map_model();
        let report =
            build_report(cat.transition(), cat.state_measure(), DEFAULT_SPECTRAL_TOL).unwrap();
        assert!((report.average_rho - 0.24940487910133038).abs() < 1e-10);
        assert!((report.lower_bound - 0.24764723245957995).abs() < 1e-10);
        assert!(report.jensen_holds);
        assert!(report.n2_ge_n1_holds);
    }

    #[test]
    fn infinite_rates_propagate() {
        let perm = SubstochasticMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mu = MeasureVector::uniform(2).unwrap();
        let report = build_report(&perm, &mu, DEFAULT_SPECTRAL_TOL).unwrap();
        assert_eq!(report.average_rho, f64::INFINITY);
        assert_eq!(report.lower_bound, f64::INFINITY);
        assert!(report.jensen_holds);
        for r in &report.hole_rates {
            assert_eq!(r.p, 0.0);
            assert_eq!(r.rho, f64::INFINITY);
        }
    }

    #[test]
    fn json_round_trip_spells_infinities() {
        let perm = SubstochasticMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mu = MeasureVector::uniform(2).unwrap();
        let report = build_report(&perm, &mu, DEFAULT_SPECTRAL_TOL).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"inf\""));
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);

        let finite = tent_report(0.3);
        let json = serde_json::to_string(&finite).unwrap();
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, finite);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for report in [tent_report(0.3), tent_report(0.5)] {
            let csv = report.to_csv();
            let back = EstimateReport::from_csv(&csv).unwrap();
            assert_eq!(back, report);
        }
        let perm = SubstochasticMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let infinite =
            build_report(&perm, &MeasureVector::uniform(2).unwrap(), DEFAULT_SPECTRAL_TOL).unwrap();
        let back = EstimateReport::from_csv(&infinite.to_csv()).unwrap();
        assert_eq!(back, infinite);
    }
}
