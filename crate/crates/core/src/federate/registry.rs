use std::time::Duration;

use serde::Serialize;

use super::FederationError;
use crate::rdf::Iri;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EndpointDescriptor {
    pub site: String,
    #[serde(serialize_with = "iri")]
    pub service: Iri,
    pub active: bool,
    #[serde(rename = "timeoutMs", serialize_with = "millis")]
    pub timeout: Duration,
}

fn iri<S: serde::Serializer>(i: &Iri, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(i.as_str())
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_millis() as u64)
}

/// Sites known to the integration host, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct EndpointRegistry {
    entries: Vec<EndpointDescriptor>,
}

fn parse_active(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "active" => Some(true),
        "false" | "no" | "0" | "inactive" => Some(false),
        _ => None,
    }
}

impl EndpointRegistry {
    pub fn new(entries: Vec<EndpointDescriptor>) -> Result<Self, FederationError> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.site == e.site) {
                return Err(FederationError::Registry { line: i + 1, message: format!("duplicate site {}", e.site) });
            }
        }
        Ok(Self { entries })
    }

    /// Lines of `site serviceIri active timeoutMs`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, FederationError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| FederationError::Registry { line: n + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [site, service, active, timeout] = fields[..] else {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            };
            let service = Iri::new(service).map_err(|e| bad(e.to_string()))?;
            if !service.as_str().starts_with("http://") && !service.as_str().starts_with("https://") {
                return Err(bad(format!("service {service} is not an http(s) IRI")));
            }
            entries.push(EndpointDescriptor {
                site: site.to_owned(),
                service,
                active: parse_active(active).ok_or_else(|| bad(format!("bad active flag {active:?}")))?,
                timeout: Duration::from_millis(timeout.parse().map_err(|_| bad(format!("bad timeout {timeout:?}")))?),
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# site service active timeoutMs\n");
        for e in &self.entries {
            out.push_str(&format!("{} {} {} {}\n", e.site, e.service, e.active, e.timeout.as_millis()));
        }
        out
    }

    pub fn entries(&self) -> &[EndpointDescriptor] {
        &self.entries
    }

    pub fn active(&self) -> impl Iterator<Item = &EndpointDescriptor> {
        self.entries.iter().filter(|e| e.active)
    }

    pub fn site(&self, name: &str) -> Option<&EndpointDescriptor> {
        self.entries.iter().find(|e| e.site == name)
    }

    pub fn by_service(&self, iri: &Iri) -> Option<&EndpointDescriptor> {
        self.entries.iter().find(|e| &e.service == iri)
    }

    pub fn set_active(&mut self, name: &str, active: bool) -> bool {
        match self.entries.iter_mut().find(|e| e.site == name) {
            Some(e) => {
                e.active = active;
                true
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let text =
            "# demo\nsamos http://localhost:2020/sparql true 5000\nikaria http://localhost:2021/sparql no 250 # down\n";
        let r = EndpointRegistry::parse(text).unwrap();
        assert_eq!(r.entries().len(), 2);
        assert_eq!(r.active().count(), 1);
        assert_eq!(r.site("ikaria").unwrap().timeout, Duration::from_millis(250));
        assert_eq!(EndpointRegistry::parse(&r.to_text()).unwrap(), r);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json[0]["service"], "http://localhost:2020/sparql");
        assert_eq!(json[1]["timeoutMs"], 250);
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in [
            "a http://x/sparql true",
            "a relative true 10",
            "a http://x/sparql maybe 10",
            "a http://x/sparql true soon",
            "a http://x/sparql true 10\na http://y/sparql true 10",
        ] {
            assert!(matches!(EndpointRegistry::parse(bad), Err(FederationError::Registry { .. })), "{bad}");
        }
    }
}
