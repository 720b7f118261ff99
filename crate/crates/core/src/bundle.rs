//! On-disk result bundle.
//!
//! | file | content |
//! |---|---|
//! | `metadata.json` | config echo, versions, timings, status, final residual, `b` |
//! | `u.gmaf`, `F.gmaf`, `gtilde.gmaf` | fields in the GMAF1 format |
//! | `estimates.json` | estimate report, when computed |
//! | `trace.txt` | one line per Newton iteration |
//!
//! Every file is written to a temporary name and renamed into place.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::monitors::{EigenSurvey, EstimateReport, ProbeReport};
use crate::operator::{assemble_gtilde, residual_from, ProblemData};
use crate::solver::{StateSummary, TraceRecord};
use crate::torus::format::{read_field, write_field, FieldData};
use crate::torus::{reduce, ComplexScalarField, HermitianMatrixField, Reduction};

pub const METADATA: &str = "metadata.json";
pub const U_FILE: &str = "u.gmaf";
pub const F_FILE: &str = "F.gmaf";
pub const GTILDE_FILE: &str = "gtilde.gmaf";
pub const ESTIMATES: &str = "estimates.json";
pub const TRACE: &str = "trace.txt";

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
#[error("{}: {message}", file.display())]
pub struct BundleError {
    pub file: PathBuf,
    pub message: String,
}

fn fail(file: &Path, message: impl ToString) -> BundleError {
    BundleError {
        file: file.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Converged,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
    pub monitors_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    /// `sup |L* w| / sup |w|`.
    pub defect: f64,
    pub min: f64,
    pub max: f64,
    /// `mean(w r)` for the final residual `r`.
    pub solvability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedReport {
    /// `sup |u - (u* - sup u*)|`.
    pub u_error: f64,
    pub b_error: f64,
    pub final_residual: f64,
    pub truth_min_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format_version: u32,
    pub package_version: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Homotopy parameter of the stored state.
    pub t: f64,
    pub b: f64,
    pub final_residual: f64,
    pub min_eig: f64,
    pub timings: Timings,
    pub path: Vec<StateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenSurvey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<ManufacturedReport>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub u: ComplexScalarField,
    pub f: ComplexScalarField,
    pub gtilde: HermitianMatrixField,
    pub estimates: Option<EstimateReport>,
    pub trace: Vec<TraceRecord>,
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), BundleError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let write = || -> std::io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, &target)
    };
    write().map_err(|e| fail(&target, e))
}

fn field_bytes(field: &FieldData) -> Vec<u8> {
    let mut out = Vec::new();
    write_field(&mut out, field).expect("writing to memory");
    out
}

impl ResultBundle {
    pub fn write(&self, dir: &Path) -> Result<(), BundleError> {
        fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        write_atomic(dir, U_FILE, &field_bytes(&FieldData::scalar(&self.u)))?;
        write_atomic(dir, F_FILE, &field_bytes(&FieldData::scalar(&self.f)))?;
        write_atomic(dir, GTILDE_FILE, &field_bytes(&FieldData::Hermitian(self.gtilde.clone())))?;
        let estimates = dir.join(ESTIMATES);
        match &self.estimates {
            Some(r) => {
                let json = serde_json::to_vec_pretty(r).map_err(|e| fail(&estimates, e))?;
                write_atomic(dir, ESTIMATES, &json)?;
            }
            None if estimates.exists() => fs::remove_file(&estimates).map_err(|e| fail(&estimates, e))?,
            None => {}
        }
        let trace: String = self.trace.iter().map(|r| format!("{r}\n")).collect();
        write_atomic(dir, TRACE, trace.as_bytes())?;
        let meta = serde_json::to_vec_pretty(&self.metadata).map_err(|e| fail(&dir.join(METADATA), e))?;
        write_atomic(dir, METADATA, &meta)
    }

    /// Loads a bundle and re-validates it; see [`ResultBundle::validate`].
    pub fn read(dir: &Path) -> Result<Self, BundleError> {
        let read_bytes = |name: &str| {
            let path = dir.join(name);
            fs::read(&path).map_err(|e| fail(&path, e))
        };
        let meta_path = dir.join(METADATA);
        let metadata: Metadata =
            serde_json::from_slice(&read_bytes(METADATA)?).map_err(|e| fail(&meta_path, e))?;
        let scalar = |name: &str| -> Result<ComplexScalarField, BundleError> {
            let path = dir.join(name);
            let file = fs::File::open(&path).map_err(|e| fail(&path, e))?;
            match read_field(BufReader::new(file)).map_err(|e| fail(&path, e))? {
                FieldData::Real(f) => Ok(f),
                other => Err(fail(&path, format!("expected a real field, found {}", other.kind()))),
            }
        };
        let u = scalar(U_FILE)?;
        let f = scalar(F_FILE)?;
        let gpath = dir.join(GTILDE_FILE);
        let gfile = fs::File::open(&gpath).map_err(|e| fail(&gpath, e))?;
        let gtilde = match read_field(BufReader::new(gfile)).map_err(|e| fail(&gpath, e))? {
            FieldData::Hermitian(h) => h,
            other => return Err(fail(&gpath, format!("expected a hermitian field, found {}", other.kind()))),
        };
        let est_path = dir.join(ESTIMATES);
        let estimates = if est_path.exists() {
            Some(serde_json::from_slice(&read_bytes(ESTIMATES)?).map_err(|e| fail(&est_path, e))?)
        } else {
            None
        };
        let trace_path = dir.join(TRACE);
        let text = String::from_utf8(read_bytes(TRACE)?).map_err(|e| fail(&trace_path, e))?;
        let trace = text
            .lines()
            .enumerate()
            .map(|(k, l)| l.parse().map_err(|e| fail(&trace_path, format!("line {}: {e}", k + 1))))
            .collect::<Result<Vec<TraceRecord>, _>>()?;
        let bundle = Self {
            metadata,
            u,
            f,
            gtilde,
            estimates,
            trace,
        };
        bundle.validate(dir)?;
        Ok(bundle)
    }

    /// Checks grid consistency with the config, `sup u = 0`, that the stored
    /// `gt` is Hermitian and equals the one assembled from `u`, and that the
    /// residual recomputed from the stored data is within tolerance.
    pub fn validate(&self, dir: &Path) -> Result<(), BundleError> {
        let meta = &self.metadata;
        let meta_path = dir.join(METADATA);
        let u_path = dir.join(U_FILE);
        let g_path = dir.join(GTILDE_FILE);
        let grid = meta.config.grid().map_err(|e| fail(&meta_path, e))?;
        for (name, g) in [(U_FILE, self.u.grid()), (F_FILE, self.f.grid()), (GTILDE_FILE, self.gtilde.grid())] {
            if *g != grid {
                return Err(fail(&dir.join(name), "grid differs from the configuration"));
            }
        }
        let sup = reduce(&self.u, Reduction::Sup).map_err(|e| fail(&u_path, e))?;
        if sup.abs() > 1e-12 {
            return Err(fail(&u_path, format!("sup u = {sup:e}, expected 0")));
        }
        let defect = self.gtilde.hermitian_defect();
        if defect > 1e-12 {
            return Err(fail(&g_path, format!("not Hermitian (defect {defect:e})")));
        }
        let base = meta.config.problem().map_err(|e| fail(&meta_path, e))?;
        let p = ProblemData::new(base.g().clone(), base.a().clone(), self.f.clone())
            .map_err(|e| fail(&dir.join(F_FILE), e))?;
        let op = assemble_gtilde(&p, &self.u).map_err(|e| fail(&u_path, e))?;
        let mismatch = op.gtilde.sup_distance(&self.gtilde).map_err(|e| fail(&g_path, e))?;
        if mismatch > 1e-12 {
            return Err(fail(&g_path, format!("differs from the assembled metric by {mismatch:e}")));
        }
        let r = residual_from(&op, &p, meta.b, meta.t).map_err(|e| fail(&u_path, e))?;
        let rn = r.max_abs();
        let tol = meta.config.solver.newton_tol;
        // the sup shift perturbs the spectrum at rounding level only
        if !(rn <= tol + 1e-12) {
            return Err(fail(&u_path, format!("residual {rn:e} exceeds tolerance {tol:e}")));
        }
        if let Some(est) = &self.estimates {
            if !est.is_finite() {
                return Err(fail(&dir.join(ESTIMATES), "non-finite entry"));
            }
        }
        Ok(())
    }
}
