//! Model-bundle persistence.
//!
//! A built formulation saves as two files: `<prefix>.model.json` holding the
//! plain QUBO fields plus the tagged penalty families, the formulation tag,
//! and the source instance; and `<prefix>.varmap.json` holding the variable
//! map. The model file stays readable as an ordinary QUBO document.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use crate::formulations::BuildOutput;
use crate::instance::{InstanceError, RoutingInstance};
use crate::qubo::{QuboModel, TermSet};
use crate::varmap::{FormulationKind, VarMapError, VariableMap};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("varmap: {0}")]
    VarMap(#[from] VarMapError),
    #[error("instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("model file is missing field {0:?}")]
    MissingField(&'static str),
}

/// Everything a solver run needs, as loaded from disk.
pub struct ModelBundle {
    pub build: BuildOutput,
    pub instance: RoutingInstance,
}

fn termset_to_json(ts: &TermSet) -> Value {
    json!({
        "offset": ts.offset,
        "linear": ts.linear.iter().map(|(&i, &c)| json!([i, c])).collect::<Vec<_>>(),
        "quadratic": ts
            .quadratic
            .iter()
            .map(|(&(i, j), &c)| json!([i, j, c]))
            .collect::<Vec<_>>(),
    })
}

fn termset_from_json(v: &Value) -> Result<TermSet, FileError> {
    let mut ts = TermSet::new();
    ts.add_offset(v["offset"].as_f64().unwrap_or(0.0));
    for e in v["linear"].as_array().ok_or(FileError::MissingField("linear"))? {
        let (i, c) = (
            e[0].as_u64().ok_or(FileError::MissingField("linear"))? as usize,
            e[1].as_f64().ok_or(FileError::MissingField("linear"))?,
        );
        ts.add_linear(i, c);
    }
    for e in v["quadratic"].as_array().ok_or(FileError::MissingField("quadratic"))? {
        let (i, j, c) = (
            e[0].as_u64().ok_or(FileError::MissingField("quadratic"))? as usize,
            e[1].as_u64().ok_or(FileError::MissingField("quadratic"))? as usize,
            e[2].as_f64().ok_or(FileError::MissingField("quadratic"))?,
        );
        ts.add_quadratic(i, j, c);
    }
    Ok(ts)
}

pub fn model_to_json(build: &BuildOutput, instance: &RoutingInstance) -> Value {
    let mut v = build.model.to_json_value();
    v["formulation"] = json!(build.varmap.kind.tag());
    v["families"] = Value::Object(
        build
            .families
            .iter()
            .map(|(name, ts)| (name.clone(), termset_to_json(ts)))
            .collect(),
    );
    v["instance"] = instance.to_json_value();
    v
}

pub fn model_from_json(v: &Value, varmap: VariableMap) -> Result<ModelBundle, FileError> {
    let model = QuboModel::from_json_value(v)?;
    let kind_tag = v["formulation"].as_str().ok_or(FileError::MissingField("formulation"))?;
    let kind = FormulationKind::parse(kind_tag)?;
    debug_assert_eq!(kind, varmap.kind);
    let mut families: BTreeMap<String, TermSet> = BTreeMap::new();
    if let Some(obj) = v["families"].as_object() {
        for (name, tv) in obj {
            families.insert(name.clone(), termset_from_json(tv)?);
        }
    }
    let instance = RoutingInstance::from_json_value(&v["instance"])?;
    Ok(ModelBundle { build: BuildOutput { model, varmap, families }, instance })
}

/// `<prefix>.model.json` and `<prefix>.varmap.json`.
pub fn bundle_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let stem = prefix.to_string_lossy();
    (PathBuf::from(format!("{stem}.model.json")), PathBuf::from(format!("{stem}.varmap.json")))
}

pub fn save_bundle(
    build: &BuildOutput,
    instance: &RoutingInstance,
    prefix: &Path,
) -> Result<(), FileError> {
    let (model_path, varmap_path) = bundle_paths(prefix);
    fs::write(&model_path, serde_json::to_string(&model_to_json(build, instance))?)?;
    build.varmap.save(&varmap_path)?;
    Ok(())
}

pub fn load_bundle(model_path: &Path, varmap_path: &Path) -> Result<ModelBundle, FileError> {
    let v: Value = serde_json::from_str(&fs::read_to_string(model_path)?)?;
    let varmap = VariableMap::load(varmap_path)?;
    model_from_json(&v, varmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::{build_gps_tsp, default_weights};
    use crate::qubo::Assignment;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bundle_round_trip_preserves_energies_and_families() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        let w = default_weights(&inst, FormulationKind::Gps);
        let build = build_gps_tsp(&inst, &w).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("m");
        save_bundle(&build, &inst, &prefix).unwrap();
        let (mp, vp) = bundle_paths(&prefix);
        let bundle = load_bundle(&mp, &vp).unwrap();
        assert_eq!(bundle.build.varmap, build.varmap);
        assert_eq!(bundle.build.families.len(), build.families.len());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = Assignment::from_bits(
                (0..build.model.n_vars()).map(|_| rng.gen_range(0..=1u8)).collect(),
            );
            let e1 = build.model.energy(&a).unwrap();
            let e2 = bundle.build.model.energy(&a).unwrap();
            assert!((e1 - e2).abs() < 1e-12);
            for (name, ts) in &build.families {
                let r1 = ts.energy(&a.bits);
                let r2 = bundle.build.families[name].energy(&a.bits);
                assert!((r1 - r2).abs() < 1e-12, "family {name}");
            }
        }
    }
}
