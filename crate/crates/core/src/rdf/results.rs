use serde_json::{json, Map, Value};

use super::{vocab, Iri, Literal, RdfError, RdfTerm, Solution, SolutionSequence};

fn term_json(term: &RdfTerm) -> Value {
    match term {
        RdfTerm::Iri(i) => json!({"type": "uri", "value": i.as_str()}),
        RdfTerm::BlankNode(b) => json!({"type": "bnode", "value": b}),
        RdfTerm::Literal(l) => {
            let mut obj = Map::new();
            obj.insert("type".into(), "literal".into());
            obj.insert("value".into(), l.lexical().into());
            if let Some(tag) = l.language() {
                obj.insert("xml:lang".into(), tag.into());
            } else if l.datatype().as_str() != vocab::XSD_STRING {
                obj.insert("datatype".into(), l.datatype().as_str().into());
            }
            Value::Object(obj)
        }
    }
}

/// `application/sparql-results+json` document for `solutions`.
pub fn write_results_json(solutions: &SolutionSequence) -> String {
    let bindings: Vec<Value> = solutions
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> =
                solutions.variables.iter().filter_map(|v| row.get(v).map(|t| (v.clone(), term_json(t)))).collect();
            Value::Object(obj)
        })
        .collect();
    json!({
        "head": {"vars": solutions.variables},
        "results": {"bindings": bindings},
    })
    .to_string()
}

fn bad(msg: impl Into<String>) -> RdfError {
    RdfError::Results(msg.into())
}

fn read_term(v: &Value) -> Result<RdfTerm, RdfError> {
    let obj = v.as_object().ok_or_else(|| bad("binding value is not an object"))?;
    let kind = obj.get("type").and_then(Value::as_str).ok_or_else(|| bad("binding without type"))?;
    let value = obj.get("value").and_then(Value::as_str).ok_or_else(|| bad("binding without value"))?;
    match kind {
        "uri" => Iri::new(value).map(RdfTerm::Iri),
        "bnode" => Ok(RdfTerm::BlankNode(value.to_owned())),
        "literal" | "typed-literal" => {
            if let Some(tag) = obj.get("xml:lang").and_then(Value::as_str) {
                Literal::lang(value, tag).map(RdfTerm::Literal)
            } else if let Some(dt) = obj.get("datatype").and_then(Value::as_str) {
                Ok(RdfTerm::Literal(Literal::typed(value, Iri::new(dt)?)))
            } else {
                Ok(RdfTerm::Literal(Literal::simple(value)))
            }
        }
        other => Err(bad(format!("unknown term type '{other}'"))),
    }
}

/// Reads a SPARQL results JSON document (SELECT form).
pub fn read_results_json(text: &str) -> Result<SolutionSequence, RdfError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let vars = doc.pointer("/head/vars").and_then(Value::as_array).ok_or_else(|| bad("missing head.vars"))?;
    let variables = vars
        .iter()
        .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| bad("non-string variable")))
        .collect::<Result<Vec<_>, _>>()?;
    let bindings =
        doc.pointer("/results/bindings").and_then(Value::as_array).ok_or_else(|| bad("missing results.bindings"))?;
    let mut rows = Vec::with_capacity(bindings.len());
    for b in bindings {
        let obj = b.as_object().ok_or_else(|| bad("binding row is not an object"))?;
        let mut row = Solution::new();
        for (k, v) in obj {
            if !variables.contains(k) {
                return Err(bad(format!("binding for undeclared variable '{k}'")));
            }
            row.insert(k.clone(), read_term(v)?);
        }
        rows.push(row);
    }
    Ok(SolutionSequence { variables, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sequence() {
        let s = SolutionSequence::new(vec!["t".into()], vec![]);
        let v: Value = serde_json::from_str(&write_results_json(&s)).unwrap();
        assert_eq!(v["head"]["vars"], json!(["t"]));
        assert_eq!(v["results"]["bindings"], json!([]));
    }

    #[test]
    fn typed_integer_binding() {
        let mut row = Solution::new();
        row.insert("id".into(), RdfTerm::Literal(Literal::integer(1149)));
        let s = SolutionSequence::new(vec!["id".into()], vec![row]);
        let v: Value = serde_json::from_str(&write_results_json(&s)).unwrap();
        let b = &v["results"]["bindings"][0]["id"];
        assert_eq!(b["type"], "literal");
        assert_eq!(b["datatype"], vocab::XSD_INTEGER);
        assert_eq!(b["value"], "1149");
        assert_eq!(read_results_json(&write_results_json(&s)).unwrap(), s);
    }

    #[test]
    fn unbound_variables_are_omitted() {
        let mut row = Solution::new();
        row.insert("a".into(), RdfTerm::BlankNode("b0".into()));
        let s = SolutionSequence::new(vec!["a".into(), "b".into()], vec![row, Solution::new()]);
        let v: Value = serde_json::from_str(&write_results_json(&s)).unwrap();
        assert_eq!(v["results"]["bindings"][0], json!({"a": {"type": "bnode", "value": "b0"}}));
        assert_eq!(v["results"]["bindings"][1], json!({}));
    }

    #[test]
    fn reader_rejects_malformed() {
        assert!(read_results_json("{}").is_err());
        assert!(read_results_json(
            r#"{"head":{"vars":["x"]},"results":{"bindings":[{"y":{"type":"uri","value":"http://a"}}]}}"#
        )
        .is_err());
        assert!(read_results_json(
            r#"{"head":{"vars":["x"]},"results":{"bindings":[{"x":{"type":"uri","value":"rel"}}]}}"#
        )
        .is_err());
    }
}
