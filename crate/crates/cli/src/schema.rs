//! Problem documents. Complex numbers are `[re, im]`, matrices are row lists.

use std::collections::BTreeMap;

use isomonodromy::rational::{FactorSign, PrincipalFactor};
use isomonodromy::{Cplx, FuchsianSystem, Matrix};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// `[re, im]`
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Cx(pub [f64; 2]);

impl Cx {
    pub fn c(self) -> Cplx {
        Complex::new(self.0[0], self.0[1])
    }
}

impl From<Cplx> for Cx {
    fn from(z: Cplx) -> Self {
        Cx([z.re, z.im])
    }
}

pub type MatrixDoc = Vec<Vec<Cx>>;

pub fn matrix_from_doc(m: &MatrixDoc) -> Result<Matrix, CliError> {
    let rows: Vec<Vec<Cplx>> = m.iter().map(|r| r.iter().map(|z| z.c()).collect()).collect();
    Matrix::from_rows(&rows).map_err(|e| CliError::Schema(format!("matrix: {e}")))
}

pub fn matrix_to_doc(m: &Matrix) -> MatrixDoc {
    m.rows().into_iter().map(|r| r.into_iter().map(Cx::from).collect()).collect()
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Monodromy,
    LocalSeries,
    Schlesinger,
    Tau,
    Isoprincipal,
    Rational,
}

/// Named checks; each belongs to one mode.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    GeneratingRelation,
    SpectralMapping,
    Recursion,
    LocalAgreement,
    ExponentMonodromy,
    SumDrift,
    TraceDrift,
    Integrability,
    Isomonodromy,
    TauClosedForm,
    Closedness,
    Isoprincipal,
    NegativeControl,
    Generic,
    ZeroSum,
    Factorization,
    TrivialMonodromy,
}

impl Check {
    pub fn mode(self) -> Mode {
        use Check::*;
        match self {
            GeneratingRelation | SpectralMapping => Mode::Monodromy,
            Recursion | LocalAgreement | ExponentMonodromy => Mode::LocalSeries,
            SumDrift | TraceDrift | Integrability | Isomonodromy => Mode::Schlesinger,
            TauClosedForm | Closedness => Mode::Tau,
            Isoprincipal | NegativeControl => Mode::Isoprincipal,
            Generic | ZeroSum | Factorization | TrivialMonodromy => Mode::Rational,
        }
    }

    /// Default threshold on the reported residual.
    pub fn default_threshold(self) -> f64 {
        use Check::*;
        match self {
            GeneratingRelation => 1e-8,
            SpectralMapping => 1e-6,
            Recursion => 1e-10,
            LocalAgreement => 1e-8,
            ExponentMonodromy => 1e-6,
            SumDrift => 1e-10,
            TraceDrift => 1e-9,
            Integrability => 1e-10,
            Isomonodromy => 1e-6,
            TauClosedForm => 1e-8,
            Closedness => 5e-8,
            Isoprincipal => 1e-6,
            NegativeControl => 1e-6,
            Generic => 0.5,
            ZeroSum => 1e-10,
            Factorization => 1e-8,
            TrivialMonodromy => 1e-8,
        }
    }

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub poles: Vec<Cx>,
    pub residues: Vec<MatrixDoc>,
    #[serde(default)]
    pub zero_sum: bool,
}

impl SystemDoc {
    pub fn build(&self) -> Result<FuchsianSystem<f64>, CliError> {
        if self.poles.len() != self.residues.len() {
            return Err(CliError::Schema(format!(
                "{} poles but {} residues",
                self.poles.len(),
                self.residues.len()
            )));
        }
        let q = self.residues.iter().map(matrix_from_doc).collect::<Result<Vec<_>, _>>()?;
        FuchsianSystem::new(self.poles.iter().map(|z| z.c()).collect(), q, self.zero_sum)
            .map_err(|e| CliError::Schema(format!("system: {e}")))
    }

    pub fn from_system(s: &FuchsianSystem<f64>) -> Self {
        Self {
            poles: s.poles().iter().map(|z| Cx::from(*z)).collect(),
            residues: s.residues().iter().map(matrix_to_doc).collect(),
            zero_sum: s.zero_sum_at_infinity(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SignDoc {
    Plus,
    Minus,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorDoc {
    pub t: Cx,
    pub z: MatrixDoc,
    /// Classified from `Z² = ±Z` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignDoc>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub factors: Vec<FactorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<MatrixDoc>,
}

impl FamilyDoc {
    pub fn factors(&self) -> Result<Vec<PrincipalFactor<f64>>, CliError> {
        self.factors
            .iter()
            .map(|f| {
                let z = matrix_from_doc(&f.z)?;
                let r = match f.sign {
                    None => PrincipalFactor::new(f.t.c(), z),
                    Some(SignDoc::Plus) => PrincipalFactor::with_sign(f.t.c(), z, FactorSign::Plus),
                    Some(SignDoc::Minus) => PrincipalFactor::with_sign(f.t.c(), z, FactorSign::Minus),
                };
                r.map_err(|e| CliError::Schema(format!("factor: {e}")))
            })
            .collect()
    }

    pub fn left(&self) -> Result<Option<Matrix>, CliError> {
        self.left.as_ref().map(matrix_from_doc).transpose()
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Integrator tolerance; `--tol` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<f64>,
    /// Per-check thresholds replacing the defaults.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<Check, f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub schema: u32,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyDoc>,
    /// Loop basepoint (chosen automatically when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<Cx>,
    /// Generator circle radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance: Option<f64>,
    /// Explicit closed loops in the x-plane, replacing generator loops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<Vec<Vec<Cx>>>,
    /// Pole-configuration path: each vertex lists all poles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_path: Option<Vec<Vec<Cx>>>,
    /// Pole indices to treat; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Trace tables to keep in the report; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    /// Structural checks that do not need numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Schema(format!("unsupported schema version {}", self.schema)));
        }
        for c in &self.checks {
            if c.mode() != self.mode {
                return Err(CliError::Schema(format!("check {} does not apply to this mode", c.name())));
            }
        }
        for (c, v) in &self.tolerances.thresholds {
            if !(v.is_finite() && *v > 0.0) {
                return Err(CliError::Schema(format!("threshold for {} must be positive", c.name())));
            }
        }
        if let Some(t) = self.tolerances.integration {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Schema("integration tolerance must be positive".into()));
            }
        }
        let needs_system = self.mode != Mode::Rational;
        match (needs_system, &self.system, &self.family) {
            (true, None, _) => return Err(CliError::Schema("this mode needs a system".into())),
            (false, _, None) => return Err(CliError::Schema("rational mode needs a family".into())),
            _ => {}
        }
        if matches!(self.mode, Mode::Schlesinger | Mode::Tau | Mode::Isoprincipal) && self.t_path.is_none() {
            return Err(CliError::Schema("this mode needs a t_path".into()));
        }
        if let (Some(sel), Some(sys)) = (&self.poles, &self.system) {
            if let Some(j) = sel.iter().find(|j| **j >= sys.poles.len()) {
                return Err(CliError::Schema(format!("pole index {j} out of range")));
            }
        }
        if let (Some(tp), Some(sys)) = (&self.t_path, &self.system) {
            if tp.is_empty() {
                return Err(CliError::Schema("t_path needs at least one vertex".into()));
            }
            if let Some(v) = tp.iter().find(|v| v.len() != sys.poles.len()) {
                return Err(CliError::Schema(format!("t_path vertex has {} entries, expected {}", v.len(), sys.poles.len())));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, c: Check) -> f64 {
        self.tolerances.thresholds.get(&c).copied().unwrap_or_else(|| c.default_threshold())
    }
}
