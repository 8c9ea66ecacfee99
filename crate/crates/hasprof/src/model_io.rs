//! Binary model files. The byte layout is described in `docs/model-format.md`.

use std::path::Path;

use hasprof_core::learn::{ForestModel, KnnModel, Node, Scaler, TreeModel};
use hasprof_core::{Classifier, Model, Nanos, WindowConfig};

use crate::error::{io_err, Error, Result};

pub const MAGIC: [u8; 8] = *b"HASPMODL";
pub const VERSION: u16 = 1;

/// A trained model together with everything needed to feed it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model,
    pub window: WindowConfig,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl SavedModel {
    pub fn new(
        model: Model,
        window: WindowConfig,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.len() != model.n_features() || class_names.len() != model.n_classes() {
            return Err(Error::Invalid(format!(
                "model has {} features and {} classes but {} feature and {} class names were given",
                model.n_features(),
                model.n_classes(),
                feature_names.len(),
                class_names.len()
            )));
        }
        if window.n_features() != feature_names.len() {
            return Err(Error::Invalid(format!(
                "window configuration yields {} features, model expects {}",
                window.n_features(),
                feature_names.len()
            )));
        }
        Ok(SavedModel { model, window, feature_names, class_names })
    }
}

pub fn save_model(path: &Path, m: &SavedModel) -> Result<()> {
    std::fs::write(path, encode(m)).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes, path)
}

pub fn encode(m: &SavedModel) -> Vec<u8> {
    let mut w = Vec::new();
    w.extend_from_slice(&MAGIC);
    w.extend_from_slice(&VERSION.to_le_bytes());
    w.push(match m.model {
        Model::Tree(_) => 0,
        Model::Forest(_) => 1,
        Model::Knn(_) => 2,
    });
    put_u32(&mut w, m.feature_names.len());
    put_u32(&mut w, m.class_names.len());
    for s in m.class_names.iter().chain(&m.feature_names) {
        put_u32(&mut w, s.len());
        w.extend_from_slice(s.as_bytes());
    }
    put_u64(&mut w, m.window.sampling_period.0);
    put_u32(&mut w, m.window.windows.len());
    for t in &m.window.windows {
        put_u64(&mut w, t.0);
    }
    put_u64(&mut w, m.window.iat_threshold.0);
    w.extend_from_slice(&m.window.ul_size_threshold.to_le_bytes());
    match &m.model {
        Model::Tree(t) => put_nodes(&mut w, t),
        Model::Forest(f) => {
            put_u64(&mut w, f.seed());
            put_u32(&mut w, f.feature_subsample());
            put_u32(&mut w, f.n_trees());
            put_u32(&mut w, f.n_samples());
            for (t, b) in f.trees().iter().zip(f.bootstraps()) {
                put_nodes(&mut w, t);
                for &i in b {
                    w.extend_from_slice(&i.to_le_bytes());
                }
            }
        }
        Model::Knn(k) => {
            put_u32(&mut w, k.k());
            put_u32(&mut w, k.labels().len());
            let s = k.scaler();
            for v in s.means.iter().chain(&s.stds).chain(k.points()) {
                w.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            for &l in k.labels() {
                put_u32(&mut w, l);
            }
        }
    }
    w
}

fn put_u32(w: &mut Vec<u8>, v: usize) {
    w.extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_nodes(w: &mut Vec<u8>, t: &TreeModel) {
    put_u32(w, t.nodes().len());
    for n in t.nodes() {
        match n {
            Node::Split { feature, threshold, left, right } => {
                w.push(0);
                w.extend_from_slice(&feature.to_le_bytes());
                w.extend_from_slice(&threshold.to_bits().to_le_bytes());
                w.extend_from_slice(&left.to_le_bytes());
                w.extend_from_slice(&right.to_le_bytes());
            }
            Node::Leaf { counts } => {
                w.push(1);
                for c in counts {
                    w.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), msg: msg.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| self.fail(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// A count whose elements take at least `unit` bytes each, checked
    /// against the remaining length before anything is allocated.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(self.fail(format!("count {n} exceeds the file size")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.count(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.fail("name is not UTF-8"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn nodes(&mut self, n_features: usize, n_classes: usize) -> Result<TreeModel> {
        let n = self.count(1)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(match self.u8()? {
                0 => {
                    Node::Split { feature: self.u32()?, threshold: self.f64()?, left: self.u32()?, right: self.u32()? }
                }
                1 => Node::Leaf { counts: (0..n_classes).map(|_| self.u32()).collect::<Result<_>>()? },
                t => return Err(self.fail(format!("unknown node tag {t}"))),
            });
        }
        TreeModel::from_parts(nodes, n_features, n_classes).map_err(|e| self.fail(e.to_string()))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<SavedModel> {
    let mut c = Cursor { buf: bytes, pos: 0, path };
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(c.fail("bad magic"));
    }
    c.pos = MAGIC.len();
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Version { path: path.to_path_buf(), found: version, supported: VERSION });
    }
    let kind = c.u8()?;
    let m = c.count(4)?;
    let k = c.count(4)?;
    if m == 0 || k < 2 {
        return Err(c.fail("need at least one feature and two classes"));
    }
    let class_names = (0..k).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let feature_names = (0..m).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
    let sampling_period = Nanos(c.u64()?);
    let n_windows = c.count(8)?;
    let windows = (0..n_windows).map(|_| c.u64().map(Nanos)).collect::<Result<Vec<_>>>()?;
    let window = WindowConfig { sampling_period, windows, iat_threshold: Nanos(c.u64()?), ul_size_threshold: c.u32()? };
    window.validate().map_err(|e| c.fail(e.to_string()))?;
    let model = match kind {
        0 => Model::Tree(c.nodes(m, k)?),
        1 => {
            let seed = c.u64()?;
            let mtry = c.u32()? as usize;
            let n_trees = c.count(1)?;
            let n_samples = c.u32()? as usize;
            let mut trees = Vec::with_capacity(n_trees);
            let mut boots = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                trees.push(c.nodes(m, k)?);
                if n_samples.saturating_mul(4) > bytes.len() - c.pos {
                    return Err(c.fail("bootstrap list exceeds the file size"));
                }
                boots.push((0..n_samples).map(|_| c.u32()).collect::<Result<Vec<_>>>()?);
            }
            Model::Forest(ForestModel::from_parts(trees, boots, seed, mtry).map_err(|e| c.fail(e.to_string()))?)
        }
        2 => {
            let kk = c.u32()? as usize;
            let n = c.count(4)?;
            if n.saturating_mul(m).saturating_mul(8) > bytes.len() - c.pos {
                return Err(c.fail("k-NN table exceeds the file size"));
            }
            let means = c.f64s(m)?;
            let stds = c.f64s(m)?;
            let points = c.f64s(n * m)?;
            let labels = (0..n).map(|_| c.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
            let scaler = Scaler::from_parts(means, stds).map_err(|e| c.fail(e.to_string()))?;
            Model::Knn(KnnModel::from_parts(scaler, points, labels, kk, k).map_err(|e| c.fail(e.to_string()))?)
        }
        t => return Err(c.fail(format!("unknown model kind {t}"))),
    };
    if c.pos != bytes.len() {
        return Err(c.fail(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    SavedModel::new(model, window, feature_names, class_names).map_err(|e| c.fail(e.to_string()))
}
