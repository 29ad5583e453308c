use serde_json::{json, Value};

fn error_response(description: &str) -> Value {
    json!({
        "description": description,
        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } }
    })
}

fn session_id_param() -> Value {
    json!({ "name": "id", "in": "path", "required": true, "schema": { "type": "string" } })
}

/// OpenAPI 3.0 description of the routes in [`crate::router`].
pub fn openapi_document() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "QAG playground",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "paths": {
            "/generate": {
                "post": {
                    "summary": "Generate question-answer pairs for a paragraph",
                    "requestBody": {
                        "required": true,
                        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/GenerateRequest" } } }
                    },
                    "responses": {
                        "200": {
                            "description": "Pairs generated synchronously",
                            "content": { "application/json": { "schema": { "$ref": "#/components/schemas/GenerateResponse" } } }
                        },
                        "202": {
                            "description": "Long context; poll the job",
                            "content": { "application/json": { "schema": { "$ref": "#/components/schemas/JobToken" } } }
                        },
                        "400": error_response("Invalid request (empty or over-long context, bad decoding parameters)"),
                        "409": error_response("Strategy cannot run with the given models"),
                        "429": error_response("The model queue is full"),
                        "502": error_response("The model backend failed"),
                        "503": error_response("No model loaded")
                    }
                }
            },
            "/jobs/{id}": {
                "get": {
                    "summary": "Status of a background generation",
                    "parameters": [session_id_param()],
                    "responses": {
                        "200": { "description": "Finished (status done or failed)" },
                        "202": { "description": "Still running" },
                        "404": error_response("Unknown job")
                    }
                }
            },
            "/models": {
                "get": {
                    "summary": "Loaded models and their queue usage",
                    "responses": { "200": { "description": "Model list" } }
                }
            },
            "/session/import": {
                "post": {
                    "summary": "Create sessions from a JSONL dataset, all pairs accepted",
                    "requestBody": { "required": true, "content": { "application/jsonl": { "schema": { "type": "string" } } } },
                    "responses": {
                        "200": { "description": "Created session ids" },
                        "400": error_response("Malformed dataset")
                    }
                }
            },
            "/session/{id}": {
                "get": {
                    "summary": "Session state",
                    "parameters": [session_id_param()],
                    "responses": {
                        "200": {
                            "description": "Session",
                            "content": { "application/json": { "schema": { "$ref": "#/components/schemas/SessionState" } } }
                        },
                        "404": error_response("Unknown session")
                    }
                }
            },
            "/session/{id}/decision": {
                "post": {
                    "summary": "Accept, reject or edit a pair",
                    "parameters": [session_id_param()],
                    "requestBody": {
                        "required": true,
                        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/DecisionRequest" } } }
                    },
                    "responses": {
                        "200": {
                            "description": "Updated session",
                            "content": { "application/json": { "schema": { "$ref": "#/components/schemas/SessionState" } } }
                        },
                        "400": error_response("Invalid edit"),
                        "404": error_response("Unknown session or pair")
                    }
                }
            },
            "/session/{id}/export": {
                "get": {
                    "summary": "Accepted pairs as a JSONL dataset",
                    "parameters": [
                        session_id_param(),
                        { "name": "format", "in": "query", "schema": { "type": "string", "enum": ["jsonl"] } }
                    ],
                    "responses": {
                        "200": { "description": "Dataset", "content": { "application/jsonl": { "schema": { "type": "string" } } } },
                        "204": { "description": "Nothing accepted yet" },
                        "400": error_response("Unsupported format"),
                        "404": error_response("Unknown session")
                    }
                }
            },
            "/spec": {
                "get": {
                    "summary": "This document",
                    "responses": { "200": { "description": "OpenAPI document" } }
                }
            }
        },
        "components": {
            "schemas": {
                "Error": {
                    "type": "object",
                    "required": ["error"],
                    "properties": {
                        "error": { "type": "string" },
                        "remediation": { "type": "string" }
                    }
                },
                "Strategy": { "type": "string", "enum": ["pipeline", "multitask", "end2end"] },
                "Decoding": {
                    "type": "object",
                    "properties": {
                        "num_beams": { "type": "integer", "minimum": 1 },
                        "answers_per_sentence": { "type": "integer", "minimum": 1 },
                        "require_answer_in_context": { "type": "boolean" }
                    }
                },
                "GenerateRequest": {
                    "type": "object",
                    "required": ["context", "strategy"],
                    "properties": {
                        "session_id": { "type": "string" },
                        "context": { "type": "string" },
                        "strategy": { "$ref": "#/components/schemas/Strategy" },
                        "models": { "type": "array", "items": { "type": "string" } },
                        "domain": { "type": "string" },
                        "decoding": { "$ref": "#/components/schemas/Decoding" }
                    }
                },
                "Pair": {
                    "type": "object",
                    "required": ["question", "answer", "strategy"],
                    "properties": {
                        "id": { "type": "string" },
                        "question": { "type": "string" },
                        "answer": { "type": "string" },
                        "strategy": { "type": "string" },
                        "source_sentence_index": { "type": "integer", "nullable": true },
                        "score": { "type": "number", "nullable": true }
                    }
                },
                "GenerateResponse": {
                    "type": "object",
                    "properties": {
                        "session_id": { "type": "string" },
                        "strategy": { "$ref": "#/components/schemas/Strategy" },
                        "models": { "type": "array", "items": { "type": "string" } },
                        "pairs": { "type": "array", "items": { "$ref": "#/components/schemas/Pair" } },
                        "dropped_segments": { "type": "integer" },
                        "filtered": { "type": "integer" },
                        "timing_ms": { "type": "integer" }
                    }
                },
                "JobToken": {
                    "type": "object",
                    "properties": {
                        "job_id": { "type": "string" },
                        "session_id": { "type": "string" },
                        "status_url": { "type": "string" }
                    }
                },
                "DecisionRequest": {
                    "type": "object",
                    "required": ["pair_id", "action"],
                    "properties": {
                        "pair_id": { "type": "string" },
                        "action": { "type": "string", "enum": ["accept", "reject", "edit"] },
                        "question": { "type": "string" },
                        "answer": { "type": "string" }
                    }
                },
                "SessionState": {
                    "type": "object",
                    "properties": {
                        "id": { "type": "string" },
                        "context": { "type": "string" },
                        "domain": { "type": "string" },
                        "strategy": { "type": "string" },
                        "models": { "type": "array", "items": { "type": "string" } },
                        "decoding": { "$ref": "#/components/schemas/Decoding" },
                        "pairs": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "id": { "type": "string" },
                                    "original": { "$ref": "#/components/schemas/Pair" },
                                    "current": { "$ref": "#/components/schemas/Pair" },
                                    "status": { "type": "string", "enum": ["pending", "accepted", "rejected"] },
                                    "history": { "type": "array", "items": { "type": "object" } }
                                }
                            }
                        }
                    }
                }
            }
        }
    })
}
