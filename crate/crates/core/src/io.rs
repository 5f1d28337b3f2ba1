//! File formats: Matrix Market matrices, JSON model manifests that reference
//! them by relative path, and JSON tangent data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coprime::{CoprimeSystem, ScalarSFunction, Term};
use crate::error::{MorError, Result};
use crate::interp::TangentData;
use crate::lti::{DescriptorSystem, TransferFunction};
use crate::parametric::{CoefficientFunction, ParamGroup, ParamPoint, ParamTangentData, ParametricCoprimeSystem};
use crate::{CMat, CVec, RMat, C64};

fn format_err(path: &Path, msg: impl std::fmt::Display) -> MorError {
    MorError::Format(format!("{}: {msg}", path.display()))
}

/// Dense `array real general` Matrix Market text; every entry carries 17
/// significant digits so a read reproduces the matrix bit for bit.
pub fn matrix_market_string(m: &RMat) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push_str(&format!("{:.16e}\n", m[(i, j)]));
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &RMat) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(MorError::NonFinite("matrix to write"));
    }
    fs::write(path, matrix_market_string(m))?;
    Ok(())
}

pub fn read_matrix_market(path: &Path) -> Result<RMat> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text).map_err(|e| format_err(path, e))
}

/// Parses `array` and `coordinate` real/integer matrices, general,
/// symmetric or skew-symmetric.
pub fn parse_matrix_market(text: &str) -> std::result::Result<RMat, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(format!("bad header '{header}'"));
    }
    let dense = match h[2].as_str() {
        "array" => true,
        "coordinate" => false,
        other => return Err(format!("unsupported format '{other}'")),
    };
    if h[3] != "real" && h[3] != "integer" && h[3] != "double" {
        return Err(format!("unsupported field '{}'", h[3]));
    }
    let sym = match h[4].as_str() {
        "general" => 0,
        "symmetric" => 1,
        "skew-symmetric" => -1,
        other => return Err(format!("unsupported symmetry '{other}'")),
    };
    let mut body = lines.filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let size_line = body.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad size entry '{t}'")))
        .collect::<std::result::Result<_, _>>()?;
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number '{t}'"));
    let tokens: Vec<&str> = body.flat_map(|l| l.split_whitespace()).collect();
    if dense {
        if dims.len() != 2 {
            return Err("array size line needs two entries".into());
        }
        let (r, c) = (dims[0], dims[1]);
        let mut m = RMat::zeros(r, c);
        let mut it = tokens.iter();
        for j in 0..c {
            let start = if sym == 0 { 0 } else if sym == 1 { j } else { j + 1 };
            for i in start..r {
                let v = num(it.next().ok_or("too few entries")?)?;
                m[(i, j)] = v;
                if sym != 0 && i != j {
                    m[(j, i)] = sym as f64 * v;
                }
            }
        }
        if it.next().is_some() {
            return Err("too many entries".into());
        }
        Ok(m)
    } else {
        if dims.len() != 3 {
            return Err("coordinate size line needs three entries".into());
        }
        let (r, c, nnz) = (dims[0], dims[1], dims[2]);
        if tokens.len() != 3 * nnz {
            return Err(format!("expected {nnz} entries"));
        }
        let mut m = RMat::zeros(r, c);
        for e in tokens.chunks(3) {
            let i: usize = e[0].parse().map_err(|_| format!("bad index '{}'", e[0]))?;
            let j: usize = e[1].parse().map_err(|_| format!("bad index '{}'", e[1]))?;
            if i == 0 || j == 0 || i > r || j > c {
                return Err(format!("index ({i}, {j}) out of range"));
            }
            let v = num(e[2])?;
            m[(i - 1, j - 1)] += v;
            if sym != 0 && i != j {
                m[(j - 1, i - 1)] += sym as f64 * v;
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermFile {
    pub f: ScalarSFunction,
    pub matrix: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupFile {
    pub coefficient: CoefficientFunction,
    pub terms: Vec<TermFile>,
}

/// JSON manifest of a model; matrix entries are paths relative to the
/// manifest's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelFile {
    Descriptor {
        #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
        e: Option<String>,
        #[serde(rename = "A")]
        a: String,
        #[serde(rename = "B")]
        b: String,
        #[serde(rename = "C")]
        c: String,
        #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
        d: Option<String>,
    },
    Coprime {
        #[serde(rename = "K")]
        k: Vec<TermFile>,
        #[serde(rename = "B")]
        b: Vec<TermFile>,
        #[serde(rename = "C")]
        c: Vec<TermFile>,
        #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
        d: Option<String>,
    },
    Parametric {
        nparams: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Vec<[f64; 2]>>,
        #[serde(rename = "K")]
        k: Vec<GroupFile>,
        #[serde(rename = "B")]
        b: Vec<GroupFile>,
        #[serde(rename = "C")]
        c: Vec<GroupFile>,
        #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
        d: Option<String>,
    },
}

/// Any model the CLI can read or write.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Descriptor(DescriptorSystem),
    Coprime(CoprimeSystem),
    Parametric(ParametricCoprimeSystem),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Descriptor(_) => "descriptor",
            Model::Coprime(_) => "coprime",
            Model::Parametric(_) => "parametric",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Model::Descriptor(s) => s.order(),
            Model::Coprime(s) => s.order(),
            Model::Parametric(s) => s.order(),
        }
    }

    fn not_parametric(&self) -> Result<&dyn TransferFunction> {
        match self {
            Model::Descriptor(s) => Ok(s),
            Model::Coprime(s) => Ok(s),
            Model::Parametric(_) => {
                Err(MorError::InvalidInput("a parametric model needs a parameter value to be evaluated".into()))
            }
        }
    }
}

impl TransferFunction for Model {
    fn inputs(&self) -> usize {
        match self {
            Model::Descriptor(s) => s.inputs(),
            Model::Coprime(s) => s.inputs(),
            Model::Parametric(s) => s.inputs(),
        }
    }
    fn outputs(&self) -> usize {
        match self {
            Model::Descriptor(s) => s.outputs(),
            Model::Coprime(s) => s.outputs(),
            Model::Parametric(s) => s.outputs(),
        }
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        self.not_parametric()?.eval(s)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        self.not_parametric()?.eval_with_derivative(s)
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        self.not_parametric()?.eval_derivative(s, k)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn read_model(path: &Path) -> Result<Model> {
    let file: ModelFile = read_json(path)?;
    let dir = base_dir(path);
    let mat = |name: &str| read_matrix_market(&dir.join(name));
    let terms = |list: &[TermFile]| -> Result<Vec<Term>> {
        list.iter().map(|t| Ok(Term::new(t.f, mat(&t.matrix)?))).collect()
    };
    let groups = |list: &[GroupFile]| -> Result<Vec<ParamGroup>> {
        list.iter().map(|g| Ok(ParamGroup::new(g.coefficient.clone(), terms(&g.terms)?))).collect()
    };
    let feedthrough = |d: &Option<String>, p: usize, m: usize| -> Result<RMat> {
        match d {
            Some(name) => mat(name),
            None => Ok(RMat::zeros(p, m)),
        }
    };
    match &file {
        ModelFile::Descriptor { e, a, b, c, d } => {
            let (a, b, c) = (mat(a)?, mat(b)?, mat(c)?);
            let e = match e {
                Some(name) => mat(name)?,
                None => RMat::identity(a.nrows(), a.nrows()),
            };
            let d = feedthrough(d, c.nrows(), b.ncols())?;
            Ok(Model::Descriptor(DescriptorSystem::new(e, a, b, c, d)?))
        }
        ModelFile::Coprime { k, b, c, d } => {
            let (k, b, c) = (terms(k)?, terms(b)?, terms(c)?);
            let (p, m) = match (c.first(), b.first()) {
                (Some(ct), Some(bt)) => (ct.matrix.nrows(), bt.matrix.ncols()),
                _ => return Err(format_err(path, "B and C need at least one term")),
            };
            let d = feedthrough(d, p, m)?;
            Ok(Model::Coprime(CoprimeSystem::new(k, b, c, d)?))
        }
        ModelFile::Parametric { nparams, bounds, k, b, c, d } => {
            let (k, b, c) = (groups(k)?, groups(b)?, groups(c)?);
            let first = |g: &[ParamGroup]| g.iter().flat_map(|x| x.terms.first()).map(|t| t.matrix.shape()).next();
            let (p, m) = match (first(&c), first(&b)) {
                (Some(cs), Some(bs)) => (cs.0, bs.1),
                _ => return Err(format_err(path, "B and C need at least one term")),
            };
            let d = feedthrough(d, p, m)?;
            let mut sys = ParametricCoprimeSystem::new(k, b, c, d, *nparams)?;
            if let Some(bx) = bounds {
                sys = sys.with_bounds(bx.iter().map(|v| (v[0], v[1])).collect())?;
            }
            Ok(Model::Parametric(sys))
        }
    }
}

/// Write `<dir>/<stem>.json` plus one `<stem>.<name>.mtx` per matrix.
pub fn write_model(dir: &Path, stem: &str, model: &Model) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let put = |name: &str, m: &RMat| -> Result<String> {
        let file = format!("{stem}.{name}.mtx");
        write_matrix_market(&dir.join(&file), m)?;
        Ok(file)
    };
    let put_terms = |prefix: &str, terms: &[Term]| -> Result<Vec<TermFile>> {
        terms
            .iter()
            .enumerate()
            .map(|(i, t)| Ok(TermFile { f: t.f, matrix: put(&format!("{prefix}{i}"), &t.matrix)? }))
            .collect()
    };
    let put_groups = |prefix: &str, groups: &[ParamGroup]| -> Result<Vec<GroupFile>> {
        groups
            .iter()
            .enumerate()
            .map(|(g, grp)| {
                Ok(GroupFile {
                    coefficient: grp.coefficient.clone(),
                    terms: put_terms(&format!("{prefix}{g}_"), &grp.terms)?,
                })
            })
            .collect()
    };
    let file = match model {
        Model::Descriptor(s) => ModelFile::Descriptor {
            e: Some(put("E", s.e())?),
            a: put("A", s.a())?,
            b: put("B", s.b())?,
            c: put("C", s.c())?,
            d: Some(put("D", s.d())?),
        },
        Model::Coprime(s) => ModelFile::Coprime {
            k: put_terms("K", s.k_terms())?,
            b: put_terms("B", s.b_terms())?,
            c: put_terms("C", s.c_terms())?,
            d: Some(put("D", s.d())?),
        },
        Model::Parametric(s) => ModelFile::Parametric {
            nparams: s.nparams(),
            bounds: s.bounds().map(|b| b.iter().map(|&(lo, hi)| [lo, hi]).collect()),
            k: put_groups("K", s.k_groups())?,
            b: put_groups("B", s.b_groups())?,
            c: put_groups("C", s.c_groups())?,
            d: Some(put("D", s.d())?),
        },
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &file)?;
    Ok(path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// A complex number written either as a plain real or as `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for C64 {
    fn from(v: ComplexValue) -> C64 {
        match v {
            ComplexValue::Real(x) => C64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => C64::new(re, im),
        }
    }
}

impl From<C64> for ComplexValue {
    fn from(z: C64) -> Self {
        if z.im == 0.0 {
            ComplexValue::Real(z.re)
        } else {
            ComplexValue::Pair([z.re, z.im])
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionFile {
    pub point: ComplexValue,
    pub direction: Vec<ComplexValue>,
    #[serde(default = "one")]
    pub order: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentFile {
    #[serde(default)]
    pub right: Vec<ConditionFile>,
    #[serde(default)]
    pub left: Vec<ConditionFile>,
}

impl TangentFile {
    pub fn to_data(&self) -> Result<TangentData> {
        let split = |list: &[ConditionFile]| -> (Vec<C64>, Vec<CVec>, Vec<usize>) {
            let pts = list.iter().map(|c| c.point.into()).collect();
            let dirs = list
                .iter()
                .map(|c| CVec::from_iterator(c.direction.len(), c.direction.iter().map(|&z| z.into())))
                .collect();
            (pts, dirs, list.iter().map(|c| c.order).collect())
        };
        let (rp, rd, ro) = split(&self.right);
        let (lp, ld, lo) = split(&self.left);
        TangentData::with_orders(rp, rd, ro, lp, ld, lo)
    }

    pub fn from_data(data: &TangentData) -> Self {
        let join = |pts: &[C64], dirs: &[CVec], orders: &[usize]| -> Vec<ConditionFile> {
            pts.iter()
                .zip(dirs)
                .zip(orders)
                .map(|((&p, d), &o)| ConditionFile {
                    point: p.into(),
                    direction: d.iter().map(|&z| z.into()).collect(),
                    order: o,
                })
                .collect()
        };
        TangentFile {
            right: join(&data.right_points, &data.right_dirs, &data.right_orders),
            left: join(&data.left_points, &data.left_dirs, &data.left_orders),
        }
    }
}

pub fn read_tangent(path: &Path) -> Result<TangentData> {
    read_json::<TangentFile>(path)?.to_data()
}

pub fn write_tangent(path: &Path, data: &TangentData) -> Result<()> {
    write_json(path, &TangentFile::from_data(data))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamPointFile {
    pub parameter: Vec<f64>,
    #[serde(flatten)]
    pub tangent: TangentFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamTangentFile {
    pub points: Vec<ParamPointFile>,
}

pub fn read_param_tangent(path: &Path) -> Result<ParamTangentData> {
    let f: ParamTangentFile = read_json(path)?;
    let points = f
        .points
        .iter()
        .map(|p| Ok(ParamPoint { parameter: p.parameter.clone(), tangent: p.tangent.to_data()? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamTangentData::new(points))
}

pub fn write_param_tangent(path: &Path, data: &ParamTangentData) -> Result<()> {
    let f = ParamTangentFile {
        points: data
            .points
            .iter()
            .map(|p| ParamPointFile { parameter: p.parameter.clone(), tangent: TangentFile::from_data(&p.tangent) })
            .collect(),
    };
    write_json(path, &f)
}
