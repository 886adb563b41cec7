// SPDX-License-Identifier: Apache-2.0

//! The JSON netlist format.
//!
//! ```json
//! {
//!   "name": "top",
//!   "library_version": "std11-1",
//!   "ports": { "inputs": ["a"], "outputs": ["y"] },
//!   "nets": ["a", "y"],
//!   "instances": [ { "id": "u1", "kind": "INV", "inputs": ["a"], "output": "y" } ],
//!   "labels": { "r0": "state" }
//! }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CellLibrary, Instance, NetId, Netlist, NetlistError, RegisterClass, RegisterLabels};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonPorts {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInstance {
    id: String,
    kind: String,
    inputs: Vec<String>,
    output: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonNetlist {
    name: String,
    library_version: String,
    ports: JsonPorts,
    nets: Vec<String>,
    instances: Vec<JsonInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<BTreeMap<String, RegisterClass>>,
}

pub fn parse_json_netlist(bytes: &[u8], lib: &Arc<CellLibrary>) -> Result<Netlist, NetlistError> {
    let raw: JsonNetlist =
        serde_json::from_slice(bytes).map_err(|e| NetlistError::Schema(e.to_string()))?;
    if raw.library_version != lib.version() {
        return Err(NetlistError::LibraryVersion {
            expected: lib.version().into(),
            found: raw.library_version,
        });
    }
    let mut index = HashMap::with_capacity(raw.nets.len());
    for (i, n) in raw.nets.iter().enumerate() {
        if index.insert(n.clone(), NetId(i)).is_some() {
            return Err(NetlistError::DuplicateNet(n.clone()));
        }
    }
    let resolve = |owner: &str, net: &str| {
        index.get(net).copied().ok_or_else(|| NetlistError::UnknownNet {
            instance: owner.into(),
            net: net.into(),
        })
    };
    let inputs = raw
        .ports
        .inputs
        .iter()
        .map(|n| resolve("<ports>", n))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = raw
        .ports
        .outputs
        .iter()
        .map(|n| resolve("<ports>", n))
        .collect::<Result<Vec<_>, _>>()?;
    let instances = raw
        .instances
        .iter()
        .map(|ji| {
            let kind = lib.find(&ji.kind).ok_or_else(|| NetlistError::UnknownKind {
                instance: ji.id.clone(),
                kind: ji.kind.clone(),
            })?;
            Ok(Instance {
                id: ji.id.clone(),
                kind,
                inputs: ji
                    .inputs
                    .iter()
                    .map(|n| resolve(&ji.id, n))
                    .collect::<Result<Vec<_>, _>>()?,
                output: resolve(&ji.id, &ji.output)?,
            })
        })
        .collect::<Result<Vec<_>, NetlistError>>()?;
    Netlist::new(
        raw.name,
        lib.clone(),
        raw.nets,
        inputs,
        outputs,
        instances,
        raw.labels.map(RegisterLabels),
    )
}

/// Canonical JSON rendering: fixed field order, nets and instances in
/// netlist order, labels sorted by register id.
pub fn emit_json_netlist(n: &Netlist) -> String {
    let name = |id: NetId| n.net_name(id).to_string();
    let raw = JsonNetlist {
        name: n.name().into(),
        library_version: n.library().version().into(),
        ports: JsonPorts {
            inputs: n.primary_inputs().iter().map(|&i| name(i)).collect(),
            outputs: n.primary_outputs().iter().map(|&i| name(i)).collect(),
        },
        nets: n.nets().to_vec(),
        instances: n
            .instances()
            .iter()
            .map(|i| JsonInstance {
                id: i.id.clone(),
                kind: n.kind_of(i).name.clone(),
                inputs: i.inputs.iter().map(|&x| name(x)).collect(),
                output: name(i.output),
            })
            .collect(),
        labels: n.labels().map(|l| l.0.clone()),
    };
    serde_json::to_string_pretty(&raw).expect("netlist serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_GATES: &str = r#"{
        "name": "t", "library_version": "std11-1",
        "ports": {"inputs": ["a", "b"], "outputs": ["y"]},
        "nets": ["a", "b", "n1", "y"],
        "instances": [
            {"id": "u1", "kind": "INV", "inputs": ["a"], "output": "n1"},
            {"id": "u2", "kind": "AND2", "inputs": ["n1", "b"], "output": "y"}
        ]
    }"#;

    fn lib() -> Arc<CellLibrary> {
        Arc::new(CellLibrary::standard())
    }

    #[test]
    fn parses_inv_driving_and() {
        let n = parse_json_netlist(TWO_GATES.as_bytes(), &lib()).unwrap();
        assert_eq!(n.instances().len(), 2);
        assert_eq!(n.nets().len(), 4);
        assert!(n.labels().is_none());
    }

    #[test]
    fn multiply_driven_net_is_named() {
        let bad = TWO_GATES.replace(r#""output": "n1""#, r#""output": "y""#);
        let err = parse_json_netlist(bad.as_bytes(), &lib()).unwrap_err();
        assert_eq!(err, NetlistError::MultiplyDriven { net: "y".into() });
    }

    #[test]
    fn unknown_kind_and_schema_errors() {
        let bad = TWO_GATES.replace("AND2", "AND9");
        assert_eq!(
            parse_json_netlist(bad.as_bytes(), &lib()).unwrap_err(),
            NetlistError::UnknownKind { instance: "u2".into(), kind: "AND9".into() }
        );
        let bad = TWO_GATES.replace(r#""output": "y"}"#, r#""output": ["y", "z"]}"#);
        assert!(matches!(
            parse_json_netlist(bad.as_bytes(), &lib()).unwrap_err(),
            NetlistError::Schema(_)
        ));
        let bad = TWO_GATES.replace(r#""nets": ["a", "b", "n1", "y"]"#, r#""nets": ["a", "b", "n1", "y", "z"]"#);
        assert_eq!(
            parse_json_netlist(bad.as_bytes(), &lib()).unwrap_err(),
            NetlistError::Undriven { net: "z".into() }
        );
    }

    #[test]
    fn field_order_is_irrelevant() {
        let v: serde_json::Value = serde_json::from_str(TWO_GATES).unwrap();
        let reordered = format!(
            r#"{{"instances": {}, "nets": {}, "ports": {}, "name": "t", "library_version": "std11-1"}}"#,
            v["instances"], v["nets"], v["ports"]
        );
        let a = parse_json_netlist(TWO_GATES.as_bytes(), &lib()).unwrap();
        let b = parse_json_netlist(reordered.as_bytes(), &lib()).unwrap();
        assert_eq!(a, b);
        assert_eq!(emit_json_netlist(&a), emit_json_netlist(&b));
    }
}
