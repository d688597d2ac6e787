//! Mapping between semantic variable indices and flat bit positions.
//!
//! Every formulation allocates its full index grid so that reported model
//! sizes include convention-fixed slots; the `clamped` map records those
//! fixed bits (almost always 0, occasionally 1) which carry no model terms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VarMapError {
    #[error("unknown formulation tag {0:?}")]
    UnknownKind(String),
    #[error("malformed variable map entry: {0}")]
    BadEntry(String),
    #[error("variable map is not a bijection: flat index {0} repeated or out of range")]
    NotBijective(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Native,
    Mtz,
    Gps,
    Position,
    Vrp5,
    Vrp3,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 6] = [
        FormulationKind::Native,
        FormulationKind::Mtz,
        FormulationKind::Gps,
        FormulationKind::Position,
        FormulationKind::Vrp5,
        FormulationKind::Vrp3,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            FormulationKind::Native => "native",
            FormulationKind::Mtz => "mtz",
            FormulationKind::Gps => "gps",
            FormulationKind::Position => "position",
            FormulationKind::Vrp5 => "vrp5",
            FormulationKind::Vrp3 => "vrp3",
        }
    }

    pub fn parse(tag: &str) -> Result<Self, VarMapError> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| VarMapError::UnknownKind(tag.to_string()))
    }

    pub fn is_vrp(&self) -> bool {
        matches!(self, FormulationKind::Vrp5 | FormulationKind::Vrp3)
    }
}

/// Semantic identity of one model bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKey {
    /// Time-indexed arc `x[u][v][t]`.
    Arc { u: usize, v: usize, t: usize },
    /// Relation slot `x[i][j][r]` (single-tour form).
    Rel { i: usize, j: usize, r: u8 },
    /// Node-at-position bit `x[node][slot]`.
    Pos { node: usize, slot: usize },
    /// Plain edge bit `x[i][j]`.
    Edge { i: usize, j: usize },
    /// Binary digit `bit` of node's visit order.
    OrderBit { node: usize, bit: u8 },
    /// Slack digit for the order inequality of the node pair `(i, j)`.
    OrderSlack { i: usize, j: usize, bit: u8 },
    /// Per-vehicle relation slot `x[i][j][r][q]`, vehicles numbered from 1.
    VrpRel { i: usize, j: usize, r: u8, q: usize },
    /// Shared precedence bit `a[i][j]`.
    VrpAux { i: usize, j: usize },
    /// Slack digit for vehicle `q`'s route-length cap.
    VrpSlack { q: usize, bit: u8 },
}

impl VarKey {
    fn to_json(self) -> Value {
        match self {
            VarKey::Arc { u, v, t } => json!(["arc", u, v, t]),
            VarKey::Rel { i, j, r } => json!(["rel", i, j, r]),
            VarKey::Pos { node, slot } => json!(["pos", node, slot]),
            VarKey::Edge { i, j } => json!(["edge", i, j]),
            VarKey::OrderBit { node, bit } => json!(["ubit", node, bit]),
            VarKey::OrderSlack { i, j, bit } => json!(["uslack", i, j, bit]),
            VarKey::VrpRel { i, j, r, q } => json!(["vrel", i, j, r, q]),
            VarKey::VrpAux { i, j } => json!(["aux", i, j]),
            VarKey::VrpSlack { q, bit } => json!(["vslack", q, bit]),
        }
    }

    fn from_json(v: &[Value]) -> Option<VarKey> {
        let tag = v.first()?.as_str()?;
        let num = |k: usize| v.get(k).and_then(Value::as_u64).map(|x| x as usize);
        Some(match tag {
            "arc" => VarKey::Arc { u: num(1)?, v: num(2)?, t: num(3)? },
            "rel" => VarKey::Rel { i: num(1)?, j: num(2)?, r: num(3)? as u8 },
            "pos" => VarKey::Pos { node: num(1)?, slot: num(2)? },
            "edge" => VarKey::Edge { i: num(1)?, j: num(2)? },
            "ubit" => VarKey::OrderBit { node: num(1)?, bit: num(2)? as u8 },
            "uslack" => VarKey::OrderSlack { i: num(1)?, j: num(2)?, bit: num(3)? as u8 },
            "vrel" => VarKey::VrpRel { i: num(1)?, j: num(2)?, r: num(3)? as u8, q: num(4)? },
            "aux" => VarKey::VrpAux { i: num(1)?, j: num(2)? },
            "vslack" => VarKey::VrpSlack { q: num(1)?, bit: num(2)? as u8 },
            _ => return None,
        })
    }
}

/// Index ranges of the formulation's variable families.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_cities: usize,
    pub n_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_vehicles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_bits: Option<u8>,
}

/// Bijection between [`VarKey`]s and flat bit positions `0..n_vars`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub kind: FormulationKind,
    pub dims: Dims,
    forward: BTreeMap<VarKey, usize>,
    backward: Vec<VarKey>,
    clamped: BTreeMap<usize, u8>,
}

impl VariableMap {
    pub fn new(kind: FormulationKind, dims: Dims) -> Self {
        Self { kind, dims, forward: BTreeMap::new(), backward: Vec::new(), clamped: BTreeMap::new() }
    }

    /// Allocates the next flat index for `key`.
    pub fn push(&mut self, key: VarKey) -> usize {
        let flat = self.backward.len();
        let prev = self.forward.insert(key, flat);
        assert!(prev.is_none(), "duplicate variable key {key:?}");
        self.backward.push(key);
        flat
    }

    /// Allocates `key` as a convention-fixed bit with the given value.
    pub fn push_clamped(&mut self, key: VarKey, value: u8) -> usize {
        let flat = self.push(key);
        self.clamped.insert(flat, value);
        flat
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    /// Flat index of an existing key; panics on unknown keys (builder bug).
    pub fn index(&self, key: VarKey) -> usize {
        *self
            .forward
            .get(&key)
            .unwrap_or_else(|| panic!("unmapped variable key {key:?}"))
    }

    pub fn get(&self, key: VarKey) -> Option<usize> {
        self.forward.get(&key).copied()
    }

    pub fn key_of(&self, flat: usize) -> VarKey {
        self.backward[flat]
    }

    pub fn is_clamped(&self, flat: usize) -> bool {
        self.clamped.contains_key(&flat)
    }

    pub fn is_active_key(&self, key: VarKey) -> bool {
        self.get(key).map(|f| !self.is_clamped(f)).unwrap_or(false)
    }

    pub fn clamped(&self) -> &BTreeMap<usize, u8> {
        &self.clamped
    }

    pub fn n_clamped(&self) -> usize {
        self.clamped.len()
    }

    /// Value of `key` in an assignment, honoring clamped conventions.
    pub fn value(&self, a: &crate::qubo::Assignment, key: VarKey) -> u8 {
        let flat = self.index(key);
        match self.clamped.get(&flat) {
            Some(&v) => v,
            None => a.get(flat),
        }
    }

    /// Writes `key`'s nominal value into a bit vector (used by encoders).
    pub fn write(&self, bits: &mut [u8], key: VarKey, value: u8) {
        let flat = self.index(key);
        debug_assert!(
            !self.clamped.contains_key(&flat) || self.clamped[&flat] == value,
            "writing {value} over clamp at {key:?}"
        );
        bits[flat] = value;
    }

    /// Fresh bit vector with clamped conventions pre-filled.
    pub fn blank_bits(&self) -> Vec<u8> {
        let mut bits = vec![0u8; self.len()];
        for (&flat, &v) in &self.clamped {
            bits[flat] = v;
        }
        bits
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "kind": self.kind.tag(),
            "dims": self.dims,
            "entries": self
                .backward
                .iter()
                .enumerate()
                .map(|(flat, key)| {
                    let mut arr = key.to_json();
                    arr.as_array_mut().unwrap().push(json!(flat));
                    arr
                })
                .collect::<Vec<_>>(),
            "clamped": self.clamped.iter().map(|(&f, &v)| json!([f, v])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json_value(v: &Value) -> Result<Self, VarMapError> {
        let kind = FormulationKind::parse(
            v["kind"].as_str().ok_or_else(|| VarMapError::BadEntry("missing kind".into()))?,
        )?;
        let dims: Dims = serde_json::from_value(v["dims"].clone())?;
        let entries = v["entries"]
            .as_array()
            .ok_or_else(|| VarMapError::BadEntry("missing entries".into()))?;
        let mut pairs = Vec::with_capacity(entries.len());
        for e in entries {
            let arr = e.as_array().ok_or_else(|| VarMapError::BadEntry(e.to_string()))?;
            if arr.len() < 2 {
                return Err(VarMapError::BadEntry(e.to_string()));
            }
            let flat = arr[arr.len() - 1]
                .as_u64()
                .ok_or_else(|| VarMapError::BadEntry(e.to_string()))? as usize;
            let key = VarKey::from_json(&arr[..arr.len() - 1])
                .ok_or_else(|| VarMapError::BadEntry(e.to_string()))?;
            pairs.push((flat, key));
        }
        let mut backward = vec![None; pairs.len()];
        for (flat, key) in pairs {
            if flat >= backward.len() || backward[flat].is_some() {
                return Err(VarMapError::NotBijective(flat));
            }
            backward[flat] = Some(key);
        }
        let backward: Vec<VarKey> = backward.into_iter().map(Option::unwrap).collect();
        let mut map = VariableMap::new(kind, dims);
        for key in &backward {
            if map.forward.contains_key(key) {
                return Err(VarMapError::BadEntry(format!("duplicate key {key:?}")));
            }
            map.push(*key);
        }
        if let Some(clamped) = v["clamped"].as_array() {
            for c in clamped {
                let arr = c.as_array().ok_or_else(|| VarMapError::BadEntry(c.to_string()))?;
                let flat = arr[0].as_u64().ok_or_else(|| VarMapError::BadEntry(c.to_string()))?;
                let val = arr.get(1).and_then(Value::as_u64).unwrap_or(0);
                map.clamped.insert(flat as usize, val as u8);
            }
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<(), VarMapError> {
        fs::write(path, serde_json::to_string(&self.to_json_value())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VarMapError> {
        let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_json_value(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_lookup_are_inverse() {
        let mut vm = VariableMap::new(
            FormulationKind::Gps,
            Dims { n_cities: 2, n_nodes: 3, slots: Some(3), ..Dims::default() },
        );
        let a = vm.push(VarKey::Rel { i: 0, j: 1, r: 0 });
        let b = vm.push_clamped(VarKey::Rel { i: 1, j: 1, r: 0 }, 0);
        assert_eq!((a, b), (0, 1));
        assert_eq!(vm.index(VarKey::Rel { i: 0, j: 1, r: 0 }), 0);
        assert_eq!(vm.key_of(1), VarKey::Rel { i: 1, j: 1, r: 0 });
        assert!(vm.is_clamped(1));
        assert!(!vm.is_clamped(0));
        assert_eq!(vm.n_clamped(), 1);
    }

    #[test]
    fn clamped_value_overrides_assignment() {
        let mut vm = VariableMap::new(FormulationKind::Position, Dims::default());
        vm.push_clamped(VarKey::Pos { node: 0, slot: 0 }, 1);
        vm.push(VarKey::Pos { node: 1, slot: 1 });
        let a = crate::qubo::Assignment::zeros(2);
        assert_eq!(vm.value(&a, VarKey::Pos { node: 0, slot: 0 }), 1);
        assert_eq!(vm.value(&a, VarKey::Pos { node: 1, slot: 1 }), 0);
        assert_eq!(vm.blank_bits(), vec![1, 0]);
    }

    #[test]
    fn json_round_trip_preserves_map() {
        let mut vm = VariableMap::new(
            FormulationKind::Vrp3,
            Dims {
                n_cities: 2,
                n_nodes: 3,
                n_vehicles: Some(2),
                slots: Some(3),
                ..Dims::default()
            },
        );
        vm.push(VarKey::VrpRel { i: 0, j: 1, r: 1, q: 1 });
        vm.push_clamped(VarKey::VrpRel { i: 1, j: 1, r: 0, q: 1 }, 0);
        vm.push(VarKey::VrpAux { i: 1, j: 2 });
        vm.push(VarKey::VrpSlack { q: 2, bit: 0 });
        let v = vm.to_json_value();
        let back = VariableMap::from_json_value(&v).unwrap();
        assert_eq!(vm, back);
    }

    #[test]
    fn corrupted_map_is_rejected() {
        let mut vm = VariableMap::new(FormulationKind::Gps, Dims::default());
        vm.push(VarKey::Rel { i: 0, j: 1, r: 0 });
        vm.push(VarKey::Rel { i: 0, j: 1, r: 1 });
        let mut v = vm.to_json_value();
        // duplicate flat index
        v["entries"][1][4] = serde_json::json!(0);
        assert!(matches!(
            VariableMap::from_json_value(&v),
            Err(VarMapError::NotBijective(0))
        ));
        // duplicate key
        let mut v3 = vm.to_json_value();
        v3["entries"][1][3] = serde_json::json!(0);
        assert!(matches!(VariableMap::from_json_value(&v3), Err(VarMapError::BadEntry(_))));
        let mut v2 = vm.to_json_value();
        v2["kind"] = serde_json::json!("nonsense");
        assert!(matches!(VariableMap::from_json_value(&v2), Err(VarMapError::UnknownKind(_))));
    }
}
