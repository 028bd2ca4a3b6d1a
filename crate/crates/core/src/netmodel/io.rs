use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChargerSpec, InstanceError, InstanceMeta, NetworkInstance, PoiNode, ScenarioConfig, TruckSpec};

/// Version tag carried by every instance document.
pub const FORMAT_TAG: &str = "etfrp-instance/1";

#[derive(Serialize, Deserialize)]
struct InstanceDocument {
    format: String,
    #[serde(default)]
    meta: InstanceMeta,
    nodes: Vec<PoiNode>,
    tau: Vec<Vec<f64>>,
    energy: Vec<Vec<f64>>,
    chargers: Vec<ChargerSpec>,
    trucks: Vec<TruckSpec>,
    config: ScenarioConfig,
}

/// Rounds to nine significant decimal digits (ties to even on the exact
/// binary value).
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Parses and validates an instance document.
pub fn load_instance(text: &str) -> Result<NetworkInstance, InstanceError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: InstanceDocument = serde_path_to_error::deserialize(de)
        .map_err(|e| InstanceError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    if doc.format != FORMAT_TAG {
        return Err(InstanceError::Format(doc.format));
    }
    let inst = NetworkInstance {
        meta: doc.meta,
        nodes: doc.nodes,
        tau: doc.tau,
        energy: doc.energy,
        chargers: doc.chargers,
        trucks: doc.trucks,
        config: doc.config,
    }
    .canonicalized();
    inst.validate()?;
    Ok(inst)
}

pub fn load_instance_file(path: impl AsRef<Path>) -> Result<NetworkInstance, InstanceError> {
    load_instance(&std::fs::read_to_string(path)?)
}

/// Serializes an instance; reals are written with at most nine significant
/// digits.
pub fn save_instance(inst: &NetworkInstance) -> String {
    let c = inst.canonicalized();
    let doc = InstanceDocument {
        format: FORMAT_TAG.to_string(),
        meta: c.meta,
        nodes: c.nodes,
        tau: c.tau,
        energy: c.energy,
        chargers: c.chargers,
        trucks: c.trucks,
        config: c.config,
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures;

    const MINIMAL: &str = r#"{
        "format": "etfrp-instance/1",
        "nodes": [
            {"id": 0, "kind": "depot", "x": 0, "y": 0},
            {"id": 1, "kind": "delivery", "x": 1, "y": 0}
        ],
        "tau": [[0, 0.5], [0.6, 0]],
        "energy": [[0, 20], [24, 0]],
        "chargers": [],
        "trucks": [{"id": 0, "start_node": 0, "battery_capacity": 400, "initial_battery": 400,
                    "battery_floor": 0, "deliveries": [1], "mode": "sequential"}],
        "config": CONFIG
    }"#;

    fn minimal_doc() -> String {
        let cfg = serde_json::to_string(&ScenarioConfig::default()).unwrap();
        MINIMAL.replace("CONFIG", &cfg)
    }

    #[test]
    fn minimal_document_loads() {
        let inst = load_instance(&minimal_doc()).unwrap();
        assert_eq!(inst.n_nodes(), 2);
        assert!(inst.chargers.is_empty());
        assert_eq!(inst.tau(1, 0), 0.6);
    }

    #[test]
    fn negative_cost_is_rejected() {
        let doc = minimal_doc().replace("[[0, 0.5]", "[[0, -1]");
        match load_instance(&doc) {
            Err(InstanceError::Validation(v)) => assert!(v.iter().any(|m| m.contains("negative cost")), "{v:?}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_names_path() {
        let doc = minimal_doc().replace("\"battery_capacity\": 400", "\"battery_capacity\": \"lots\"");
        match load_instance(&doc) {
            Err(InstanceError::Parse { path, .. }) => assert_eq!(path, "trucks[0].battery_capacity"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_format_tag() {
        let doc = minimal_doc().replace("etfrp-instance/1", "etfrp-instance/9");
        assert!(matches!(load_instance(&doc), Err(InstanceError::Format(_))));
    }

    #[test]
    fn fixture_round_trip() {
        let t1 = fixtures::t1();
        let back = load_instance(&save_instance(&t1)).unwrap();
        assert_eq!(back, t1);
        assert_eq!((back.n_nodes(), back.chargers.len(), back.trucks.len()), (4, 1, 1));
    }

    #[test]
    fn asymmetric_entries_survive_exactly() {
        let mut t1 = fixtures::t1();
        t1.tau[0][1] = 1.23456789;
        t1.tau[1][0] = 9.87654321;
        let back = load_instance(&save_instance(&t1)).unwrap();
        assert_eq!(back.tau[0][1], 1.23456789);
        assert_eq!(back.tau[1][0], 9.87654321);
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(round_sig9(1.0 / 3.0), 0.333333333);
        assert_eq!(round_sig9(123456.78912), 123456.789);
        assert_eq!(round_sig9(0.0), 0.0);
        assert_eq!(round_sig9(2.5), 2.5);
    }
}
