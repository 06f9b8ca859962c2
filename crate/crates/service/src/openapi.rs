use std::sync::{Arc, OnceLock};

use serde_json::{json, Value};

fn vector() -> Value {
    json!({"type": "array", "items": {"type": "number"}})
}

fn body(props: Value, required: &[&str]) -> Value {
    json!({
        "required": true,
        "content": {"application/json": {"schema": {"type": "object", "properties": props, "required": required}}}
    })
}

fn ok(description: &str) -> Value {
    json!({
        "200": {"description": description},
        "400": {"$ref": "#/components/responses/Error"},
        "409": {"$ref": "#/components/responses/Error"},
        "422": {"$ref": "#/components/responses/Error"}
    })
}

fn build() -> Value {
    let direction = json!({"type": "string", "enum": ["increasing", "decreasing"]});
    json!({
        "openapi": "3.0.3",
        "info": {"title": "rashgam service", "version": env!("CARGO_PKG_VERSION")},
        "paths": {
            "/api/model": {"get": {"summary": "Model shape functions as step lists", "responses": ok("model view")}},
            "/api/ellipsoid/meta": {"get": {"summary": "Dimension, threshold, log-volume and loss at the center", "responses": ok("metadata")}},
            "/api/contains": {"post": {
                "summary": "Membership of a coefficient vector",
                "requestBody": body(json!({"omega": vector()}), &["omega"]),
                "responses": ok("{q, inside}")
            }},
            "/api/project": {"post": {
                "summary": "Closest ellipsoid point to a requested vector",
                "requestBody": body(json!({"omega_req": vector()}), &["omega_req"]),
                "responses": ok("{omega, distance, inside_already, mu}")
            }},
            "/api/monotone": {"post": {
                "summary": "Closest monotone model in the ellipsoid metric",
                "requestBody": body(json!({
                    "feature": {"type": "integer"},
                    "direction": direction,
                    "extra": {"type": "array", "items": {"type": "object", "properties": {"feature": {"type": "integer"}, "direction": direction}}},
                    "fixed": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}
                }), &["feature", "direction"]),
                "responses": ok("{omega, q, feasible, kkt_residual, iterations}")
            }},
            "/api/vi": {"get": {
                "summary": "Variable-importance ranges for every feature",
                "parameters": [{"name": "fix_others", "in": "query", "schema": {"type": "boolean", "default": false}}],
                "responses": ok("one row per feature")
            }},
            "/api/sample": {"post": {
                "summary": "Uniform samples from the ellipsoid",
                "requestBody": body(json!({"n": {"type": "integer", "minimum": 1}, "seed": {"type": "integer", "default": 42}}), &["n"]),
                "responses": ok("{samples}")
            }},
            "/api/jumps": {"post": {
                "summary": "Share of sampled models that step down, up or stay flat at a bin boundary",
                "requestBody": body(json!({
                    "feature": {"type": "integer"},
                    "k": {"type": "integer"},
                    "n": {"type": "integer", "minimum": 1},
                    "tau": {"type": "number", "default": 0},
                    "seed": {"type": "integer", "default": 42}
                }), &["feature", "k", "n"]),
                "responses": ok("jump report")
            }},
            "/api/reload": {"post": {"summary": "Re-read the model and ellipsoid files", "responses": ok("metadata of the new session")}},
            "/api/spec": {"get": {"summary": "This document", "responses": {"200": {"description": "OpenAPI document"}}}}
        },
        "components": {"responses": {"Error": {
            "description": "Error with a machine-readable code",
            "content": {"application/json": {"schema": {"type": "object", "properties": {"code": {"type": "string"}, "message": {"type": "string"}}}}}
        }}}
    })
}

pub fn document() -> Arc<Value> {
    static DOC: OnceLock<Arc<Value>> = OnceLock::new();
    DOC.get_or_init(|| Arc::new(build())).clone()
}
