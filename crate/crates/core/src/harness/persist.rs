//! Plain-text model files.
//!
//! ```text
//! opfr v1 cg <metric> <n> <d>
//! opfr v1 knn <metric> <n> <d> <k> <sigma> <dmax>
//! ```
//!
//! followed by one line per node in settlement order:
//! `<id> <label> <cost> [<rho>] <pred id|-> <root id> <proto 0|1> <features...>`,
//! where `<rho>` appears only for k-nn models.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::forest::{DensityField, ForestVariant, PrototypeSet, TrainedForest};
use crate::metricspace::Metric;

const MAGIC: &str = "opfr";
const VERSION: &str = "v1";

pub fn model_to_string(forest: &TrainedForest) -> String {
    let samples = forest.samples().samples();
    let mut out = String::new();
    let _ = write!(
        out,
        "{MAGIC} {VERSION} {} {} {} {}",
        forest.variant().name(),
        forest.metric(),
        samples.len(),
        forest.samples().dim()
    );
    let density = forest.density();
    if let Some(d) = density {
        let _ = write!(out, " {} {} {}", d.k, d.sigma, d.d_max);
    }
    out.push('\n');
    for &node in forest.order() {
        let s = &samples[node];
        let _ = write!(out, "{} {} {}", s.id, s.label, forest.costs()[node]);
        if let Some(d) = density {
            let _ = write!(out, " {}", d.rho[node]);
        }
        match forest.preds()[node] {
            Some(p) => {
                let _ = write!(out, " {}", samples[p].id);
            }
            None => out.push_str(" -"),
        }
        let _ = write!(
            out,
            " {} {}",
            samples[forest.roots()[node]].id,
            u8::from(forest.prototypes().contains(node))
        );
        for x in &s.features {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

struct NodeLine {
    line: usize,
    sample: LabeledSample,
    cost: f64,
    rho: Option<f64>,
    pred: Option<u64>,
    root: u64,
    proto: bool,
}

fn corrupt(line: usize, reason: impl Into<String>) -> Error {
    Error::CorruptModel {
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| corrupt(line, format!("bad {what} {token:?}")))
}

fn finite(line: usize, token: &str, what: &str) -> Result<f64> {
    let v: f64 = num(line, token, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(corrupt(line, format!("non-finite {what} {token:?}")))
    }
}

pub fn model_from_str(text: &str) -> Result<TrainedForest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| corrupt(1, "empty model file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.first() != Some(&MAGIC) {
        return Err(corrupt(1, "not an opfr model"));
    }
    match head.get(1) {
        Some(&VERSION) => {}
        Some(v) => return Err(Error::VersionMismatch((*v).to_string())),
        None => return Err(corrupt(1, "missing version")),
    }
    let is_knn = match head.get(2) {
        Some(&"cg") if head.len() == 6 => false,
        Some(&"knn") if head.len() == 9 => true,
        _ => return Err(corrupt(1, "unknown variant or wrong header arity")),
    };
    let metric: Metric = head[3].parse().map_err(|_| corrupt(1, format!("unknown metric {:?}", head[3])))?;
    let n: usize = num(1, head[4], "node count")?;
    let dim: usize = num(1, head[5], "dimension")?;
    if n == 0 || dim == 0 {
        return Err(corrupt(1, "empty model"));
    }
    let knn_params = if is_knn {
        let k: usize = num(1, head[6], "k")?;
        let sigma = finite(1, head[7], "sigma")?;
        let d_max = finite(1, head[8], "dmax")?;
        Some((k, sigma, d_max))
    } else {
        None
    };

    let fixed = if is_knn { 7 } else { 6 };
    let mut nodes = Vec::with_capacity(n);
    let mut last_line = 1;
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        last_line = line;
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if tok.len() != fixed + dim {
            return Err(corrupt(
                line,
                format!("expected {} fields, found {}", fixed + dim, tok.len()),
            ));
        }
        let mut t = tok.iter();
        let mut next = || *t.next().expect("arity checked");
        let id: u64 = num(line, next(), "id")?;
        let label: u32 = num(line, next(), "label")?;
        let cost = finite(line, next(), "cost")?;
        let rho = if is_knn { Some(finite(line, next(), "density")?) } else { None };
        let pred = match next() {
            "-" => None,
            p => Some(num(line, p, "predecessor")?),
        };
        let root: u64 = num(line, next(), "root")?;
        let proto = match next() {
            "0" => false,
            "1" => true,
            p => return Err(corrupt(line, format!("bad prototype flag {p:?}"))),
        };
        let features = tok[fixed..]
            .iter()
            .map(|x| finite(line, x, "feature"))
            .collect::<Result<Vec<_>>>()?;
        nodes.push(NodeLine {
            line,
            sample: LabeledSample::new(id, label, features),
            cost,
            rho,
            pred,
            root,
            proto,
        });
    }
    if nodes.len() != n {
        return Err(corrupt(
            last_line + 1,
            format!("header declares {n} nodes, found {}", nodes.len()),
        ));
    }

    let n_classes = nodes.iter().map(|l| l.sample.label).max().expect("n > 0") + 1;
    let dataset = Dataset::new(nodes.iter().map(|l| l.sample.clone()).collect(), n_classes)
        .map_err(|e| e.context("model samples"))?;
    let index = |line: usize, id: u64| {
        dataset
            .index_of(id)
            .ok_or_else(|| corrupt(line, format!("reference to unknown id {id}")))
    };

    let mut cost = vec![0.0; n];
    let mut pred = vec![None; n];
    let mut root = vec![0; n];
    let mut rho = vec![0.0; n];
    let mut order = Vec::with_capacity(n);
    let mut prototypes = PrototypeSet::default();
    for l in &nodes {
        let i = index(l.line, l.sample.id)?;
        order.push(i);
        cost[i] = l.cost;
        pred[i] = l.pred.map(|p| index(l.line, p)).transpose()?;
        root[i] = index(l.line, l.root)?;
        if let Some(r) = l.rho {
            rho[i] = r;
        }
        if l.proto {
            prototypes.insert(i);
        }
    }

    // Every pred chain must end at the node's root, and the root must be a
    // tree root; chains are at most n long.
    for (l, &i) in nodes.iter().zip(&order) {
        let mut cur = i;
        let mut steps = 0;
        while let Some(p) = pred[cur] {
            cur = p;
            steps += 1;
            if steps > n {
                return Err(corrupt(l.line, "predecessor cycle"));
            }
        }
        if cur != root[i] {
            return Err(corrupt(l.line, "root does not match predecessor chain"));
        }
    }

    let variant = match knn_params {
        None => ForestVariant::CompleteGraph,
        Some((k, sigma, d_max)) => ForestVariant::Knn {
            k,
            density: DensityField { rho, sigma, d_max, k },
        },
    };
    Ok(TrainedForest::assemble(
        variant, metric, dataset, cost, pred, root, prototypes, order,
    ))
}

pub fn save_model(forest: &TrainedForest, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(forest)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedForest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;
    use crate::harness::synthetic::gaussian_blobs;
    use crate::opf_cg::train_cg;
    use crate::opf_knn::train_knn;

    fn blobs() -> Dataset {
        gaussian_blobs(&[vec![0.0, 0.0, 1.0], vec![2.0, 1.0, 0.0], vec![-1.0, 3.0, 2.0]], 12, 0.9, 21)
            .unwrap()
    }

    #[test]
    fn cg_round_trip() {
        let forest = train_cg(&blobs(), Metric::Manhattan).unwrap();
        let text = model_to_string(&forest);
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, forest);
        assert_eq!(model_to_string(&back), text);
    }

    #[test]
    fn knn_round_trip() {
        let forest = train_knn(&blobs(), 5, Metric::Euclidean).unwrap();
        let back = model_from_str(&model_to_string(&forest)).unwrap();
        assert_eq!(back, forest);
        assert_eq!(back.density(), forest.density());
    }

    #[test]
    fn file_round_trip() {
        let forest = train_cg(&parse_dataset("3 2 1\n5 0 0\n7 1 2\n9 0 0.5\n").unwrap(), Metric::Euclidean)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.opf");
        save_model(&forest, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), forest);
        assert!(matches!(load_model(&dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn rejects_damage() {
        let forest = train_cg(&blobs(), Metric::Euclidean).unwrap();
        let text = model_to_string(&forest);

        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(model_from_str(&truncated), Err(Error::CorruptModel { .. })));

        let v2 = text.replacen("opfr v1", "opfr v2", 1);
        assert!(matches!(model_from_str(&v2), Err(Error::VersionMismatch(v)) if v == "v2"));

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3].push_str(" 1.0");
        let extra = lines.join("\n");
        assert!(matches!(model_from_str(&extra), Err(Error::CorruptModel { line: 4, .. })));

        assert!(model_from_str("").is_err());
        assert!(model_from_str("hello v1 cg euclidean 1 1\n").is_err());
    }

    #[test]
    fn rejects_cycles() {
        let text = "opfr v1 cg euclidean 2 1\n0 0 0 1 0 1 0\n1 1 0 0 0 1 1\n";
        assert!(matches!(model_from_str(text), Err(Error::CorruptModel { .. })));
    }
}
