//! Shared helpers for the integration tests: a small JSON Schema
//! (draft-07 subset) validator for the shipped schema files.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

pub fn load_schema(name: &str) -> Value {
    let p = schema_dir().join(name);
    let s = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    serde_json::from_str(&s).unwrap()
}

/// Validates `doc` against the schema file `name`; returns every violation
/// as `path: message`.
pub fn validate(name: &str, doc: &Value) -> Vec<String> {
    let root = load_schema(name);
    let mut errs = Vec::new();
    check(&root, &root, doc, "$", &mut errs);
    errs
}

pub fn assert_valid(name: &str, doc: &Value) {
    let errs = validate(name, doc);
    assert!(errs.is_empty(), "{name}: {errs:#?}");
}

fn resolve<'a>(root: &'a Value, pointer: &str) -> &'a Value {
    root.pointer(pointer).unwrap_or_else(|| panic!("unresolved ref #{pointer}"))
}

fn type_ok(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
        other => panic!("unsupported type {other}"),
    }
}

fn check(root: &Value, schema: &Value, v: &Value, path: &str, errs: &mut Vec<String>) {
    let Some(s) = schema.as_object() else {
        return;
    };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        if let Some(ptr) = r.strip_prefix('#') {
            check(root, resolve(root, ptr), v, path, errs);
        } else {
            let (file, ptr) = r.split_once('#').unwrap_or((r, ""));
            let other = load_schema(file);
            let target = if ptr.is_empty() { other.clone() } else { resolve(&other, ptr).clone() };
            check(&other, &target, v, path, errs);
        }
        return;
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_ok(t, v),
            Value::Array(ts) => ts.iter().any(|t| type_ok(t.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            errs.push(format!("{path}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(e) = s.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            errs.push(format!("{path}: {v} not in {e:?}"));
        }
    }
    if let (Some(p), Some(x)) = (s.get("pattern").and_then(Value::as_str), v.as_str()) {
        if !regex::Regex::new(p).unwrap().is_match(x) {
            errs.push(format!("{path}: '{x}' does not match {p}"));
        }
    }
    if let Some(x) = v.as_f64() {
        let bound = |k: &str| s.get(k).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|m| x < m) {
            errs.push(format!("{path}: {x} below minimum"));
        }
        if bound("maximum").is_some_and(|m| x > m) {
            errs.push(format!("{path}: {x} above maximum"));
        }
        if bound("exclusiveMinimum").is_some_and(|m| x <= m) {
            errs.push(format!("{path}: {x} not above exclusiveMinimum"));
        }
        if bound("exclusiveMaximum").is_some_and(|m| x >= m) {
            errs.push(format!("{path}: {x} not below exclusiveMaximum"));
        }
    }
    if let Some(a) = v.as_array() {
        if let Some(m) = s.get("minItems").and_then(Value::as_u64) {
            if (a.len() as u64) < m {
                errs.push(format!("{path}: fewer than {m} items"));
            }
        }
        if let Some(m) = s.get("maxItems").and_then(Value::as_u64) {
            if (a.len() as u64) > m {
                errs.push(format!("{path}: more than {m} items"));
            }
        }
        if let Some(items) = s.get("items") {
            for (i, x) in a.iter().enumerate() {
                check(root, items, x, &format!("{path}[{i}]"), errs);
            }
        }
    }
    if let Some(o) = v.as_object() {
        if let Some(req) = s.get("required").and_then(Value::as_array) {
            for k in req {
                let k = k.as_str().unwrap();
                if !o.contains_key(k) {
                    errs.push(format!("{path}: missing '{k}'"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (k, x) in o {
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check(root, ps, x, &format!("{path}.{k}"), errs),
                None => match s.get("additionalProperties") {
                    Some(Value::Bool(false)) => errs.push(format!("{path}: unexpected '{k}'")),
                    Some(ap @ Value::Object(_)) => check(root, ap, x, &format!("{path}.{k}"), errs),
                    _ => {}
                },
            }
        }
    }
    if let Some(alts) = s.get("oneOf").and_then(Value::as_array) {
        let hits = alts
            .iter()
            .filter(|alt| {
                let mut e = Vec::new();
                check(root, alt, v, path, &mut e);
                e.is_empty()
            })
            .count();
        if hits != 1 {
            errs.push(format!("{path}: matches {hits} of oneOf alternatives"));
        }
    }
}
