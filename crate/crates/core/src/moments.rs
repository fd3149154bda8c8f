//! Linear moment functions `m(D; θ, g) = m1(D; g)·θ + m2(D; g)`.
//!
//! Two moments are supported: the doubly robust CATE score (`cate_aipw`) and
//! the conditional mean. [`orthogonality_check`] evaluates the conditional
//! moment by exact enumeration over a finite law and returns the finite
//! difference quotient in a nuisance direction.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::kernels::KernelWeights;

pub const DEFAULT_PI_CLIP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentKind {
    CateAipw,
    ConditionalMean,
}

impl MomentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MomentKind::CateAipw => "cate_aipw",
            MomentKind::ConditionalMean => "conditional_mean",
        }
    }
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MomentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cate_aipw" => Ok(MomentKind::CateAipw),
            "conditional_mean" => Ok(MomentKind::ConditionalMean),
            other => Err(Error::Config(alloc::format!(
                "unknown moment `{other}` (expected cate_aipw or conditional_mean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NuisanceRole {
    Mu0,
    Mu1,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSpec {
    pub kind: MomentKind,
    /// Propensities are clamped into `[pi_clip, 1 - pi_clip]`.
    pub pi_clip: f64,
}

impl MomentSpec {
    pub fn new(kind: MomentKind) -> Self {
        MomentSpec {
            kind,
            pi_clip: DEFAULT_PI_CLIP,
        }
    }

    pub fn with_clip(kind: MomentKind, pi_clip: f64) -> Result<Self> {
        if !(pi_clip > 0.0 && pi_clip < 0.5) {
            return Err(Error::Config(alloc::format!("pi_clip must lie in (0, 0.5), got {pi_clip}")));
        }
        Ok(MomentSpec { kind, pi_clip })
    }

    pub fn required_nuisances(&self) -> &'static [NuisanceRole] {
        match self.kind {
            MomentKind::CateAipw => &[NuisanceRole::Mu0, NuisanceRole::Mu1, NuisanceRole::Pi],
            MomentKind::ConditionalMean => &[],
        }
    }

    pub fn needs_treatment(&self) -> bool {
        self.kind == MomentKind::CateAipw
    }
}

/// Per-unit nuisance evaluations `g = (μ0, μ1, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceValues {
    pub mu0: f64,
    pub mu1: f64,
    pub pi: f64,
}

impl NuisanceValues {
    pub fn new(mu0: f64, mu1: f64, pi: f64, pi_clip: f64) -> Self {
        NuisanceValues {
            mu0,
            mu1,
            pi: clip(pi, pi_clip),
        }
    }

    pub fn mu(&self, w: u8) -> f64 {
        if w == 1 {
            self.mu1
        } else {
            self.mu0
        }
    }

    /// Horvitz-Thompson weight `w/π − (1−w)/(1−π)`.
    pub fn beta(&self, w: u8) -> f64 {
        if w == 1 {
            1.0 / self.pi
        } else {
            -1.0 / (1.0 - self.pi)
        }
    }
}

pub fn clip(pi: f64, pi_clip: f64) -> f64 {
    pi.clamp(pi_clip, 1.0 - pi_clip)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Terms {
    pub m1: f64,
    pub m2: f64,
}

impl Terms {
    pub fn value(&self, theta: f64) -> f64 {
        self.m1 * theta + self.m2
    }
}

pub fn evaluate_terms(moment: &MomentSpec, obs: &Observation<'_>, g: Option<&NuisanceValues>) -> Result<Terms> {
    match moment.kind {
        MomentKind::ConditionalMean => Ok(Terms { m1: -1.0, m2: obs.y }),
        MomentKind::CateAipw => {
            let w = obs.w.ok_or(Error::MissingTreatment)?;
            let g = g.ok_or(Error::MissingNuisance)?;
            let g = NuisanceValues::new(g.mu0, g.mu1, g.pi, moment.pi_clip);
            Ok(Terms {
                m1: -1.0,
                m2: aipw(&g, w, obs.y),
            })
        }
    }
}

#[inline]
fn aipw(g: &NuisanceValues, w: u8, y: f64) -> f64 {
    (g.mu1 - g.mu0) + g.beta(w) * (y - g.mu(w))
}

/// `Σ_i K_i (m1_i θ + m2_i)`, with `terms` indexed by unit.
pub fn moment_residual(weights: &KernelWeights, terms: &[Terms], theta: f64) -> f64 {
    weights.weights.iter().map(|&(i, k)| k * terms[i].value(theta)).sum()
}

/// One support point of a joint law over `(Y(0), Y(1), W, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoAtom {
    pub y0: f64,
    pub y1: f64,
    pub w: u8,
    pub z: Vec<f64>,
    pub prob: f64,
}

impl PoAtom {
    pub fn y(&self) -> f64 {
        if self.w == 1 {
            self.y1
        } else {
            self.y0
        }
    }
}

/// Finite law over potential outcomes, treatment and covariates. `x` is the
/// sub-vector of `z` at `conditioning`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeLaw {
    atoms: Vec<PoAtom>,
    conditioning: Vec<usize>,
}

impl PotentialOutcomeLaw {
    pub fn new(atoms: Vec<PoAtom>, conditioning: Vec<usize>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::UnsupportedLaw("law has no atoms".into()));
        }
        let dim = atoms[0].z.len();
        let mut total = 0.0;
        for a in &atoms {
            if a.z.len() != dim || !(a.prob >= 0.0) || !a.y0.is_finite() || !a.y1.is_finite() || a.w > 1 {
                return Err(Error::UnsupportedLaw("malformed atom".into()));
            }
            total += a.prob;
        }
        if crate::math::abs(total - 1.0) > 1e-12 {
            return Err(Error::UnsupportedLaw(alloc::format!("probabilities sum to {total}")));
        }
        if conditioning.iter().any(|&c| c >= dim) {
            return Err(Error::UnsupportedLaw("conditioning index out of range".into()));
        }
        Ok(PotentialOutcomeLaw { atoms, conditioning })
    }

    /// Law with `W ⟂ (Y(0), Y(1)) | Z`. `cells` lists `(z, P(Z = z), π(z),
    /// outcome atoms (y0, y1, prob))`.
    pub fn unconfounded(cells: Vec<(Vec<f64>, f64, f64, Vec<(f64, f64, f64)>)>, conditioning: Vec<usize>) -> Result<Self> {
        let mut atoms = Vec::new();
        for (z, pz, pi, outcomes) in cells {
            for (y0, y1, p) in outcomes {
                for (w, pw) in [(0u8, 1.0 - pi), (1u8, pi)] {
                    atoms.push(PoAtom {
                        y0,
                        y1,
                        w,
                        z: z.clone(),
                        prob: pz * p * pw,
                    });
                }
            }
        }
        PotentialOutcomeLaw::new(atoms, conditioning)
    }

    pub fn atoms(&self) -> &[PoAtom] {
        &self.atoms
    }

    fn in_cell(&self, a: &PoAtom, x: &[f64]) -> bool {
        self.conditioning.len() == x.len() && self.conditioning.iter().zip(x).all(|(&c, &v)| a.z[c] == v)
    }

    /// True nuisances at `z`: `μ_w(z) = E[Y | W = w, Z = z]`, `π(z) = P(W = 1 | Z = z)`.
    pub fn nuisance_at(&self, z: &[f64]) -> Result<NuisanceValues> {
        let (mut p0, mut p1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0);
        for a in self.atoms.iter().filter(|a| a.z == z) {
            if a.w == 1 {
                p1 += a.prob;
                s1 += a.prob * a.y1;
            } else {
                p0 += a.prob;
                s0 += a.prob * a.y0;
            }
        }
        if p0 <= 0.0 || p1 <= 0.0 {
            return Err(Error::UnsupportedLaw("overlap fails at a covariate atom".into()));
        }
        Ok(NuisanceValues {
            mu0: s0 / p0,
            mu1: s1 / p1,
            pi: p1 / (p0 + p1),
        })
    }

    /// `θ0(x)`: the CATE or the conditional mean of the observed outcome.
    pub fn theta0(&self, kind: MomentKind, x: &[f64]) -> Result<f64> {
        let mut mass = 0.0;
        let mut acc = 0.0;
        for a in self.atoms.iter().filter(|a| self.in_cell(a, x)) {
            mass += a.prob;
            acc += a.prob
                * match kind {
                    MomentKind::CateAipw => a.y1 - a.y0,
                    MomentKind::ConditionalMean => a.y(),
                };
        }
        if mass <= 0.0 {
            return Err(Error::UnsupportedLaw("query cell has no mass".into()));
        }
        Ok(acc / mass)
    }

    /// `E[m(D; θ, g) | X = x]` with `g` supplied per atom. Propensities are
    /// used unclipped.
    pub fn conditional_moment<G>(&self, moment: CheckedMoment, x: &[f64], theta: f64, g: G) -> Result<f64>
    where
        G: Fn(&PoAtom) -> Result<NuisanceValues>,
    {
        let mut mass = 0.0;
        let mut acc = 0.0;
        for a in self.atoms.iter().filter(|a| self.in_cell(a, x)) {
            let value = match moment {
                CheckedMoment::Moment(MomentKind::ConditionalMean) => a.y() - theta,
                CheckedMoment::Moment(MomentKind::CateAipw) => {
                    let gv = g(a)?;
                    if !(gv.pi > 0.0 && gv.pi < 1.0) {
                        return Err(Error::UnsupportedLaw("perturbed propensity leaves (0, 1)".into()));
                    }
                    aipw(&gv, a.w, a.y()) - theta
                }
                CheckedMoment::PlugIn => {
                    let gv = g(a)?;
                    gv.mu1 - gv.mu0 - theta
                }
            };
            mass += a.prob;
            acc += a.prob * value;
        }
        if mass <= 0.0 {
            return Err(Error::UnsupportedLaw("query cell has no mass".into()));
        }
        Ok(acc / mass)
    }
}

/// Moments accepted by [`orthogonality_check`]. `PlugIn` is the regression
/// contrast `μ1 − μ0 − θ`, which is not orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckedMoment {
    Moment(MomentKind),
    PlugIn,
}

impl CheckedMoment {
    fn target(&self) -> MomentKind {
        match self {
            CheckedMoment::Moment(k) => *k,
            CheckedMoment::PlugIn => MomentKind::CateAipw,
        }
    }
}

/// Constant nuisance perturbation `h = (h_μ0, h_μ1, h_π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub mu0: f64,
    pub mu1: f64,
    pub pi: f64,
}

/// `D(t) = [M(x; θ0, g0 + t h) − M(x; θ0, g0)] / t`, computed exactly.
pub fn orthogonality_check(
    moment: CheckedMoment,
    law: &PotentialOutcomeLaw,
    x_cell: &[f64],
    direction: Perturbation,
    t: f64,
) -> Result<f64> {
    if !(t.is_finite() && t != 0.0) {
        return Err(Error::InvalidData(String::from("step t must be finite and nonzero")));
    }
    let theta0 = law.theta0(moment.target(), x_cell)?;
    let base = law.conditional_moment(moment, x_cell, theta0, |a| law.nuisance_at(&a.z))?;
    let moved = law.conditional_moment(moment, x_cell, theta0, |a| {
        let g = law.nuisance_at(&a.z)?;
        Ok(NuisanceValues {
            mu0: g.mu0 + t * direction.mu0,
            mu1: g.mu1 + t * direction.mu1,
            pi: g.pi + t * direction.pi,
        })
    })?;
    Ok((moved - base) / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(y: f64, w: Option<u8>) -> Observation<'static> {
        Observation { y, w, z: &[], x: &[] }
    }

    #[test]
    fn aipw_hand_value() {
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let g = NuisanceValues::new(0.5, 1.0, 0.5, 0.01);
        let t = evaluate_terms(&spec, &obs(2.0, Some(1)), Some(&g)).unwrap();
        assert_eq!(t, Terms { m1: -1.0, m2: 2.5 });
    }

    #[test]
    fn aipw_zero_residual() {
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let g = NuisanceValues::new(1.0, 1.75, 0.3, 0.01);
        let t = evaluate_terms(&spec, &obs(1.0, Some(0)), Some(&g)).unwrap();
        assert!((t.m2 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn conditional_mean_terms() {
        let spec = MomentSpec::new(MomentKind::ConditionalMean);
        let t = evaluate_terms(&spec, &obs(3.0, None), None).unwrap();
        assert_eq!(t, Terms { m1: -1.0, m2: 3.0 });
        assert_eq!(t.value(3.0), 0.0);
    }

    #[test]
    fn missing_inputs() {
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let g = NuisanceValues::new(0.0, 0.0, 0.5, 0.01);
        assert_eq!(evaluate_terms(&spec, &obs(1.0, None), Some(&g)), Err(Error::MissingTreatment));
        assert_eq!(evaluate_terms(&spec, &obs(1.0, Some(1)), None), Err(Error::MissingNuisance));
    }

    #[test]
    fn propensity_clipped() {
        assert_eq!(NuisanceValues::new(0.0, 0.0, 0.001, 0.01).pi, 0.01);
        assert_eq!(NuisanceValues::new(0.0, 0.0, 0.9999, 0.01).pi, 0.99);
    }

    #[test]
    fn residual_linearity() {
        let weights = KernelWeights {
            weights: vec![(0, 0.5), (2, 0.5)],
        };
        let terms = [
            Terms { m1: -1.0, m2: 1.0 },
            Terms { m1: -1.0, m2: 100.0 },
            Terms { m1: -1.0, m2: 3.0 },
        ];
        assert_eq!(moment_residual(&weights, &terms, 0.0), 2.0);
        assert_eq!(moment_residual(&weights, &terms, 2.0), 0.0);
        assert_eq!(moment_residual(&KernelWeights::default(), &terms, 1.0), 0.0);
    }

    #[test]
    fn moment_kind_round_trip() {
        for k in [MomentKind::CateAipw, MomentKind::ConditionalMean] {
            assert_eq!(k.as_str().parse::<MomentKind>().unwrap(), k);
        }
        assert!("quantile".parse::<MomentKind>().is_err());
    }
}
