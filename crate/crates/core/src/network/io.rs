//! Model file format: a single JSON document.
//!
//! ```text
//! {"format":"phasornet-model/1",
//!  "projection":{"kind":"nrp","seed":1,"dimension":784,"density":1.0,"momentum":0.99,
//!                "matrix":[...row-major...]|null,"mask":[...]|null,
//!                "moments":{"mean":[...],"std":[...]}},
//!  "layers":[{"in":784,"out":100,"dropout":0.25,"weights":[...row-major...]}],
//!  "n_classes":10,
//!  "meta":{...}}
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde_json::{json, Map, Value};

use super::projection::{Moments, ProjectionKind, ProjectionSpec};
use super::{DenseLayerSpec, Model};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "phasornet-model/1";

pub fn model_to_json(model: &Model) -> Value {
    let p = &model.projection;
    let layers: Vec<Value> = model
        .layers
        .iter()
        .map(|l| {
            json!({
                "in": l.in_dim,
                "out": l.out_dim,
                "dropout": l.dropout_rate,
                "weights": l.weights.iter().copied().collect::<Vec<f64>>(),
            })
        })
        .collect();
    json!({
        "format": MODEL_FORMAT,
        "projection": {
            "kind": p.kind.as_str(),
            "seed": p.seed,
            "dimension": p.dimension,
            "density": p.density,
            "momentum": p.momentum,
            "matrix": p.matrix.as_ref().map(|m| m.iter().copied().collect::<Vec<f64>>()),
            "mask": p.mask,
            "moments": {"mean": p.moments.mean, "std": p.moments.std},
        },
        "layers": layers,
        "n_classes": model.n_classes,
        "meta": Value::Object(model.meta.clone()),
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&model_to_json(model))?;
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::malformed("<document>", format!("{} ({e})", path.display())))?;
    model_from_json(&value)
}

fn field<'a>(obj: &'a Map<String, Value>, prefix: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::malformed(join(prefix, key), "missing"))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn as_object<'a>(v: &'a Value, name: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::malformed(name, "expected an object"))
}

fn as_usize(v: &Value, name: &str) -> Result<usize> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| Error::malformed(name, "expected a non-negative integer"))
}

fn as_f64(v: &Value, name: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::malformed(name, "expected a number"))
}

fn as_f64_vec(v: &Value, name: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::malformed(name, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| x.as_f64().ok_or_else(|| Error::malformed(format!("{name}[{i}]"), "expected a number")))
        .collect()
}

pub fn model_from_json(doc: &Value) -> Result<Model> {
    let root = as_object(doc, "<document>")?;
    let format = field(root, "", "format")?;
    if format.as_str() != Some(MODEL_FORMAT) {
        return Err(Error::malformed("format", format!("expected \"{MODEL_FORMAT}\", found {format}")));
    }

    let proj = as_object(field(root, "", "projection")?, "projection")?;
    let kind_v = field(proj, "projection", "kind")?;
    let kind: ProjectionKind = kind_v
        .as_str()
        .ok_or_else(|| Error::malformed("projection.kind", "expected a string"))?
        .parse()
        .map_err(|_| Error::malformed("projection.kind", format!("unknown kind {kind_v}")))?;
    let seed = field(proj, "projection", "seed")?
        .as_u64()
        .ok_or_else(|| Error::malformed("projection.seed", "expected an unsigned integer"))?;
    let dimension = as_usize(field(proj, "projection", "dimension")?, "projection.dimension")?;
    let density = as_f64(field(proj, "projection", "density")?, "projection.density")?;
    let momentum = as_f64(field(proj, "projection", "momentum")?, "projection.momentum")?;
    let matrix = match field(proj, "projection", "matrix")? {
        Value::Null => None,
        v => {
            let flat = as_f64_vec(v, "projection.matrix")?;
            if flat.len() != dimension * dimension {
                return Err(Error::malformed(
                    "projection.matrix",
                    format!("{} entries for dimension {dimension}", flat.len()),
                ));
            }
            Some(Array2::from_shape_vec((dimension, dimension), flat).expect("checked length"))
        }
    };
    let mask = match field(proj, "projection", "mask")? {
        Value::Null => None,
        v => Some(as_f64_vec(v, "projection.mask")?),
    };
    let moments_obj = as_object(field(proj, "projection", "moments")?, "projection.moments")?;
    let moments = Moments {
        mean: as_f64_vec(field(moments_obj, "projection.moments", "mean")?, "projection.moments.mean")?,
        std: as_f64_vec(field(moments_obj, "projection.moments", "std")?, "projection.moments.std")?,
    };
    let projection = ProjectionSpec { kind, seed, dimension, density, matrix, mask, moments, momentum };

    let layers_v = field(root, "", "layers")?
        .as_array()
        .ok_or_else(|| Error::malformed("layers", "expected an array"))?;
    let mut layers = Vec::with_capacity(layers_v.len());
    for (i, lv) in layers_v.iter().enumerate() {
        let prefix = format!("layers[{i}]");
        let lo = as_object(lv, &prefix)?;
        let in_dim = as_usize(field(lo, &prefix, "in")?, &join(&prefix, "in"))?;
        let out_dim = as_usize(field(lo, &prefix, "out")?, &join(&prefix, "out"))?;
        let dropout_rate = as_f64(field(lo, &prefix, "dropout")?, &join(&prefix, "dropout"))?;
        let flat = as_f64_vec(field(lo, &prefix, "weights")?, &join(&prefix, "weights"))?;
        if flat.len() != in_dim * out_dim {
            return Err(Error::DimensionChain(format!(
                "{prefix}.weights has {} entries for {out_dim}x{in_dim}",
                flat.len()
            )));
        }
        let weights = Array2::from_shape_vec((out_dim, in_dim), flat).expect("checked length");
        layers.push(DenseLayerSpec { in_dim, out_dim, weights, dropout_rate });
    }
    let n_classes = as_usize(field(root, "", "n_classes")?, "n_classes")?;
    let meta = match root.get("meta") {
        None | Some(Value::Null) => Map::new(),
        Some(v) => as_object(v, "meta")?.clone(),
    };
    let model = Model { projection, layers, n_classes, meta };
    model.validate()?;
    Ok(model)
}
