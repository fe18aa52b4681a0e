#![allow(dead_code)]
//! Small configs that run in seconds.

use serde_json::{json, Value};

pub fn tiny_avoided_crossing(out: &str) -> Value {
    json!({
        "name": "tiny",
        "study": { "kind": "error_curve", "orders": [0, 1, 2], "refine": false },
        "model": { "kind": "avoided_crossing", "delta": 0.5 },
        "grid": { "extents": [[-8.0, 8.0]], "nodes": [256] },
        "epsilons": [0.4, 0.2, 0.1, 0.05],
        "time": { "final": 0.5 },
        "ensemble": {
            "n": 8, "kinetic_bound": 8.0, "seed": 7,
            "center": [[-1.0, 1.0]], "width": [0.5, 0.8], "momentum": [[-0.5, 0.5]]
        },
        "output": { "dir": out }
    })
}

pub fn tiny_constant_frame(out: &str) -> Value {
    let mut v = tiny_avoided_crossing(out);
    v["name"] = json!("tiny_constant");
    v["model"] = json!({ "kind": "constant_frame", "dim": 1, "levels": [-1.0, 1.0], "curvature": 0.5 });
    v
}

pub fn write(dir: &std::path::Path, name: &str, v: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}
