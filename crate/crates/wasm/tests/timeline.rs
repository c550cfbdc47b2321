use commitguard_wasm::{bars, builtin_json, simulate_json};

#[test]
fn every_builtin_yields_a_consistent_timeline() {
    let map: std::collections::BTreeMap<String, String> = serde_json::from_str(&builtin_json()).unwrap();
    for (name, jsonl) in &map {
        for policy in ["fcfs", "priority"] {
            let v: serde_json::Value = serde_json::from_str(&simulate_json(jsonl, policy, "").unwrap()).unwrap();
            assert_eq!(v["consistent"], true, "{name}");
            for bar in v["bars"].as_array().unwrap() {
                assert!(bar["start"].as_u64() <= bar["end"].as_u64(), "{name}");
                assert!(bar["created"].as_u64() <= bar["start"].as_u64(), "{name}");
            }
        }
    }
}

#[test]
fn bad_input_is_an_error_not_a_panic() {
    assert!(simulate_json("{", "fcfs", "").is_err());
    assert!(simulate_json("", "fcfs", "").unwrap().contains("\"bars\":[]"));
    assert!(bars(&Default::default()).is_empty());
}
