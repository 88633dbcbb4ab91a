//! PLDA backend: two-covariance model storage, embedding preprocessing,
//! per-recording PCA at a variance-retention ratio, simultaneous
//! diagonalization, and pairwise log-likelihood-ratio scoring.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-8;

/// Two-covariance PLDA model: mean, across-class covariance B (speaker
/// variability, PSD) and within-class covariance W (session variability,
/// positive definite).
#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    mean: Array1<f64>,
    across: Array2<f64>,
    within: Array2<f64>,
}

impl PldaModel {
    pub fn new(mean: Array1<f64>, across: Array2<f64>, within: Array2<f64>) -> Result<Self> {
        let d = mean.len();
        if across.dim() != (d, d) || within.dim() != (d, d) {
            return Err(Error::invalid(format!(
                "covariance shapes must be {d}x{d}, got {:?} and {:?}",
                across.dim(),
                within.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite())
            || across.iter().any(|v| !v.is_finite())
            || within.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("model entries must be finite"));
        }
        let scale = across
            .iter()
            .chain(within.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        if linalg::asymmetry(&across) > SYMMETRY_TOL * scale
            || linalg::asymmetry(&within) > SYMMETRY_TOL * scale
        {
            return Err(Error::invalid("covariances must be symmetric"));
        }
        linalg::cholesky(&within)
            .map_err(|e| Error::numeric(format!("within-class covariance not positive definite: {e}")))?;
        // PSD check on B: clamp slightly negative eigenvalues to zero.
        let (vals, vecs) = linalg::sym_eigh(&across)?;
        let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min < -PSD_TOL * scale {
            return Err(Error::invalid(format!(
                "across-class covariance not positive semi-definite (min eigenvalue {min:e})"
            )));
        }
        let across = if min < 0.0 {
            let mut lam = Array2::<f64>::zeros((d, d));
            for i in 0..d {
                lam[[i, i]] = vals[i].max(0.0);
            }
            vecs.dot(&lam).dot(&vecs.t())
        } else {
            across
        };
        Ok(Self { mean, across, within })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn across_class(&self) -> &Array2<f64> {
        &self.across
    }

    pub fn within_class(&self) -> &Array2<f64> {
        &self.within
    }

    /// Model expressed after an arbitrary invertible linear map x ← M·x.
    /// Used for whitening; the map need not be orthonormal.
    pub fn linearly_transformed(&self, m: &Array2<f64>) -> Result<PldaModel> {
        if m.ncols() != self.dim() {
            return Err(Error::invalid("transform width must match model dimension"));
        }
        PldaModel::new(
            m.dot(&self.mean),
            m.dot(&self.across).dot(&m.t()),
            m.dot(&self.within).dot(&m.t()),
        )
    }
}

/// Simultaneously diagonalized form: a transform T with T·W·Tᵀ = I and
/// T·B·Tᵀ = diag(phi), phi sorted descending.
#[derive(Debug, Clone)]
pub struct DiagonalizedPlda {
    transform: Array2<f64>,
    phi: Array1<f64>,
}

impl DiagonalizedPlda {
    pub fn transform(&self) -> &Array2<f64> {
        &self.transform
    }

    pub fn phi(&self) -> &Array1<f64> {
        &self.phi
    }

    /// Map centered vectors into the diagonalized space: rows of the result
    /// are T·(x − mean).
    pub fn apply(&self, x: &Array2<f64>, mean: &Array1<f64>) -> Array2<f64> {
        let centered = x - &mean.view().insert_axis(ndarray::Axis(0));
        centered.dot(&self.transform.t())
    }
}

/// Center, whiten, and length-normalize embedding rows: each vector becomes
/// whitener·(v − mean) scaled to Euclidean norm sqrt(D).
pub fn preprocess(x: &Array2<f64>, mean: &Array1<f64>, whitener: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != mean.len() || whitener.ncols() != mean.len() {
        return Err(Error::invalid("preprocess: dimension mismatch"));
    }
    let centered = x - &mean.view().insert_axis(ndarray::Axis(0));
    let mut out = centered.dot(&whitener.t());
    let d = out.ncols();
    let target = (d as f64).sqrt();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::numeric(format!(
                "preprocess: vector {i} has zero norm after whitening"
            )));
        }
        let f = target / norm;
        row.mapv_inplace(|v| v * f);
    }
    Ok(out)
}

/// Outcome of the per-recording PCA.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// k×D matrix with orthonormal rows.
    pub matrix: Array2<f64>,
    /// Input vectors projected to the retained subspace.
    pub projected: Array2<f64>,
    /// True when too few vectors were available and the identity was used.
    pub identity_fallback: bool,
}

/// PCA on the recording's empirical covariance, keeping the smallest number
/// of leading components whose eigenvalue share reaches `retained_variance`.
/// A ratio of 1.0 keeps all dimensions (pure rotation). Fewer than two
/// vectors fall back to the identity projection.
pub fn per_recording_pca(x: &Array2<f64>, retained_variance: f64) -> Result<PcaProjection> {
    if !(0.0..=1.0).contains(&retained_variance) {
        return Err(Error::config(format!(
            "retained_variance must be in [0, 1], got {retained_variance}"
        )));
    }
    let d = x.ncols();
    let n = x.nrows();
    if n < 2 {
        return Ok(PcaProjection {
            matrix: Array2::eye(d),
            projected: x.clone(),
            identity_fallback: true,
        });
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = x - &mean.view().insert_axis(ndarray::Axis(0));
    let cov = centered.t().dot(&centered) / n as f64;
    let (vals, vecs) = linalg::sym_eigh(&cov)?;
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    if total <= 1e-30 {
        // all vectors identical: no variance to rank
        return Ok(PcaProjection {
            matrix: Array2::eye(d),
            projected: x.clone(),
            identity_fallback: true,
        });
    }
    let k = if retained_variance >= 1.0 - 1e-12 {
        d
    } else {
        let mut cum = 0.0;
        let mut k = d;
        for (i, v) in vals.iter().enumerate() {
            cum += v.max(0.0);
            if cum / total >= retained_variance - 1e-12 {
                k = i + 1;
                break;
            }
        }
        k
    };
    // eigenvectors are columns; projection rows are their transposes
    let matrix = vecs.slice(ndarray::s![.., ..k]).t().to_owned();
    let projected = x.dot(&matrix.t());
    Ok(PcaProjection {
        matrix,
        projected,
        identity_fallback: false,
    })
}

/// Express the model inside the subspace spanned by the orthonormal rows of P.
pub fn project_plda(model: &PldaModel, p: &Array2<f64>) -> Result<PldaModel> {
    if p.ncols() != model.dim() {
        return Err(Error::invalid("projection width must match model dimension"));
    }
    let gram = p.dot(&p.t());
    let k = p.nrows();
    for i in 0..k {
        for j in 0..k {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (gram[[i, j]] - expect).abs() > ORTHO_TOL {
                return Err(Error::invalid(
                    "projection rows must be orthonormal within 1e-8",
                ));
            }
        }
    }
    PldaModel::new(
        p.dot(&model.mean),
        p.dot(&model.across).dot(&p.t()),
        p.dot(&model.within).dot(&p.t()),
    )
}

/// Solve the simultaneous diagonalization: find T with T·W·Tᵀ = I and
/// T·B·Tᵀ = diag(phi), phi sorted descending (generalized eigenproblem
/// B·v = λ·W·v).
pub fn diagonalize(model: &PldaModel) -> Result<DiagonalizedPlda> {
    let l = linalg::cholesky(model.within_class())?;
    let li = linalg::lower_inverse(&l);
    let m = li.dot(model.across_class()).dot(&li.t());
    let (vals, vecs) = linalg::sym_eigh(&m)?;
    let transform = vecs.t().dot(&li);
    let phi = vals.mapv(|v| v.max(0.0));
    Ok(DiagonalizedPlda { transform, phi })
}

/// Pairwise log-likelihood ratios under the two-covariance model:
/// entry (i, j) = log p(x_i, x_j | same speaker) − log p(x_i, x_j |
/// different speakers), where the stacked pair has covariance
/// [[B+W, B], [B, B+W]] under the same-speaker hypothesis and
/// [[B+W, 0], [0, B+W]] otherwise.
pub fn llr_matrix(x: &Array2<f64>, model: &PldaModel) -> Result<Array2<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::invalid("llr_matrix: dimension mismatch"));
    }
    let diag = diagonalize(model)?;
    let z = diag.apply(x, model.mean());
    let n = z.nrows();
    let d = z.ncols();
    // Per dimension with across-class variance p and within-class 1:
    //   same: [[1+p, p], [p, 1+p]]   diff: [[1+p, 0], [0, 1+p]]
    // llr_d(u, v) = -0.5·ln((a²-b²)/a²) - 0.5·[(a(u²+v²) - 2buv)/(a²-b²) - (u²+v²)/a]
    // with a = 1+p, b = p.
    let mut log_det = 0.0f64;
    let mut quad_coef = Vec::with_capacity(d);
    let mut cross_coef = Vec::with_capacity(d);
    for k in 0..d {
        let p = diag.phi[k];
        let a = 1.0 + p;
        let det = a * a - p * p; // = 1 + 2p, > 0
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::numeric("llr_matrix: singular total covariance"));
        }
        log_det += (det / (a * a)).ln();
        quad_coef.push(a / det - 1.0 / a);
        cross_coef.push(p / det);
    }
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut quad = 0.0;
            let mut cross = 0.0;
            for k in 0..d {
                let u = z[[i, k]];
                let v = z[[j, k]];
                quad += quad_coef[k] * (u * u + v * v);
                cross += cross_coef[k] * u * v;
            }
            let llr = -0.5 * log_det - 0.5 * quad + cross;
            out[[i, j]] = llr;
            out[[j, i]] = llr;
        }
    }
    Ok(out)
}

const PLDA_MAGIC: &str = "DIARKIT-PLDA v1";

/// Write the model file: header `DIARKIT-PLDA v1 <D>`, the mean row, D rows
/// of B, then D rows of W, all with 17 significant digits (exact round-trip).
pub fn write_plda<W: Write>(model: &PldaModel, mut writer: W) -> Result<()> {
    let d = model.dim();
    writeln!(writer, "{PLDA_MAGIC} {d}")?;
    let mut write_row = |row: &[f64]| -> Result<()> {
        let text: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(writer, "{}", text.join(" "))?;
        Ok(())
    };
    write_row(model.mean.as_slice().expect("contiguous"))?;
    for i in 0..d {
        write_row(model.across.row(i).to_slice().expect("contiguous"))?;
    }
    for i in 0..d {
        write_row(model.within.row(i).to_slice().expect("contiguous"))?;
    }
    Ok(())
}

pub fn write_plda_file(model: &PldaModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_plda(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_plda<R: BufRead>(reader: R) -> Result<PldaModel> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing model header"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "DIARKIT-PLDA" || fields[1] != "v1" {
        return Err(Error::parse(1, format!("bad model header '{header}'")));
    }
    let d: usize = fields[2]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad dimension '{}'", fields[2])))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * d + 1);
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = trimmed
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number '{s}'")))
            })
            .collect();
        let row = row?;
        if row.len() != d {
            return Err(Error::parse(
                lineno,
                format!("expected {d} values, got {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != 2 * d + 1 {
        return Err(Error::invalid(format!(
            "model file must have {} rows after the header, got {}",
            2 * d + 1,
            rows.len()
        )));
    }
    let mean = Array1::from_vec(rows[0].clone());
    let flat_b: Vec<f64> = rows[1..=d].iter().flatten().copied().collect();
    let flat_w: Vec<f64> = rows[d + 1..].iter().flatten().copied().collect();
    let across = Array2::from_shape_vec((d, d), flat_b).expect("checked shape");
    let within = Array2::from_shape_vec((d, d), flat_w).expect("checked shape");
    PldaModel::new(mean, across, within)
}

pub fn read_plda_file(path: impl AsRef<Path>) -> Result<PldaModel> {
    read_plda(BufReader::new(File::open(path)?))
}
