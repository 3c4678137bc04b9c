//! Line-delimited event log.
//!
//! One JSON object per line:
//!
//! ```text
//! {"arms":[{"id":"a1","x":[..],"z":[..]}, ..],"chosen":"a1","reward":1,"propensity":0.5,"hidden":{"a1":1,..}}
//! ```
//!
//! `z`, `propensity` and `hidden` are optional on input. The writer emits
//! the canonical form: fixed field order, `propensity` always present,
//! `hidden` keys in arm order, every float with 17 significant digits.
//! Canonical lines survive parse/serialize unchanged byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::context::{Arm, ArmId, FeatureVector, LoggedEvent, TrialContext};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    id: String,
    x: Vec<f64>,
    #[serde(default)]
    z: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    arms: Vec<RawArm>,
    chosen: String,
    reward: f64,
    #[serde(default)]
    propensity: Option<f64>,
    #[serde(default)]
    hidden: Option<BTreeMap<String, f64>>,
}

pub fn parse_event_line(line: &str) -> Result<LoggedEvent> {
    let raw: RawEvent = serde_json::from_str(line).map_err(|e| Error::Malformed(e.to_string()))?;
    let arms = raw
        .arms
        .into_iter()
        .map(|a| {
            let x = FeatureVector::new(a.x)?;
            let z = a.z.map(FeatureVector::new).transpose()?;
            Ok(Arm {
                id: ArmId::new(a.id),
                x,
                z,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let context = TrialContext::new(arms)?;
    let hidden = match raw.hidden {
        None => None,
        Some(mut map) => {
            let aligned = context
                .ids()
                .map(|id| {
                    map.remove(id.as_str())
                        .ok_or_else(|| Error::HiddenCoverage(id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(extra) = map.keys().next() {
                return Err(Error::Malformed(format!(
                    "hidden reward for arm {extra} not in context"
                )));
            }
            Some(aligned)
        }
    };
    LoggedEvent::new(
        context,
        ArmId::new(raw.chosen),
        raw.reward,
        raw.propensity,
        hidden,
    )
}

fn write_float(out: &mut String, v: f64) {
    // {:.16e} is 17 significant digits, enough to round-trip any f64.
    write!(out, "{v:.16e}").unwrap();
}

fn write_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

fn write_floats(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_float(out, *v);
    }
    out.push(']');
}

/// Canonical single-line encoding of an event (no trailing newline).
pub fn serialize_event(event: &LoggedEvent) -> String {
    let mut out = String::with_capacity(64 * event.num_arms());
    out.push_str("{\"arms\":[");
    for (i, arm) in event.context.arms().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"id\":");
        write_str(&mut out, arm.id.as_str());
        out.push_str(",\"x\":");
        write_floats(&mut out, &arm.x);
        if let Some(z) = &arm.z {
            out.push_str(",\"z\":");
            write_floats(&mut out, z);
        }
        out.push('}');
    }
    out.push_str("],\"chosen\":");
    write_str(&mut out, event.chosen.as_str());
    out.push_str(",\"reward\":");
    write_float(&mut out, event.reward);
    out.push_str(",\"propensity\":");
    write_float(&mut out, event.propensity);
    if let Some(hidden) = &event.hidden {
        out.push_str(",\"hidden\":{");
        for (i, (id, r)) in event.context.ids().zip(hidden).enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_str(&mut out, id.as_str());
            out.push(':');
            write_float(&mut out, *r);
        }
        out.push('}');
    }
    out.push('}');
    out
}

/// Reads every non-blank line of an event log. Errors carry the line number.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<LoggedEvent>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_event_line(&line).map_err(|e| Error::AtLine {
            path: path.display().to_string(),
            line: n + 1,
            source: Box::new(e),
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_events<'a>(
    path: impl AsRef<Path>,
    events: impl IntoIterator<Item = &'a LoggedEvent>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for event in events {
        writeln!(w, "{}", serialize_event(event))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn missing_propensity_defaults_to_uniform() {
        let line =
            r#"{"arms":[{"id":"a1","x":[1,0]},{"id":"a2","x":[0,1]}],"chosen":"a1","reward":1}"#;
        let ev = parse_event_line(line).unwrap();
        assert_eq!(ev.propensity, 0.5);
        assert_eq!(ev.num_arms(), 2);
        assert_eq!(ev.context.x_dim(), 2);
    }

    #[test]
    fn chosen_arm_must_be_listed() {
        let line =
            r#"{"arms":[{"id":"a1","x":[1,0]},{"id":"a2","x":[0,1]}],"chosen":"a9","reward":1}"#;
        let err = parse_event_line(line).unwrap_err();
        assert_eq!(err.to_string(), "chosen arm not in context: a9");
    }

    #[test]
    fn rejects_bad_records() {
        for line in [
            "not json",
            r#"{"arms":[{"id":"a1","x":[1]}],"chosen":"a1","reward":2}"#,
            r#"{"arms":[{"id":"a1","x":[1]},{"id":"a2","x":[1,2]}],"chosen":"a1","reward":1}"#,
            r#"{"arms":[{"id":"a1","x":[1]}],"chosen":"a1","reward":1,"hidden":{}}"#,
            r#"{"arms":[{"id":"a1","x":[1]}],"chosen":"a1","reward":1,"extra":3}"#,
            r#"{"arms":[{"id":"a1","x":[1]}],"chosen":"a1","reward":1,"propensity":0}"#,
        ] {
            assert!(parse_event_line(line).is_err(), "{line}");
        }
    }

    #[test]
    fn canonical_form_is_stable() {
        let line = r#"{"arms":[{"id":"a1","x":[0.1,2],"z":[3]},{"id":"a2","x":[1e-3,-0.0],"z":[0.25]}],"hidden":{"a2":0,"a1":1},"reward":1,"chosen":"a1"}"#;
        let once = serialize_event(&parse_event_line(line).unwrap());
        let twice = serialize_event(&parse_event_line(&once).unwrap());
        assert_eq!(once, twice);
        assert!(once.starts_with(r#"{"arms":[{"id":"a1","x":[1.0000000000000001e-1,"#));
        assert!(
            once.ends_with(r#""hidden":{"a1":1.0000000000000000e0,"a2":0.0000000000000000e0}}"#)
        );
    }

    fn arb_event() -> impl Strategy<Value = LoggedEvent> {
        (1usize..7, 1usize..5, prop::option::of(1usize..4)).prop_flat_map(|(k, d, zk)| {
            let arms = prop::collection::vec(
                (
                    prop::collection::vec(-1e6f64..1e6, d),
                    prop::collection::vec(-1e3f64..1e3, zk.unwrap_or(0)),
                ),
                k,
            );
            (
                arms,
                0..k,
                0.0f64..=1.0,
                prop::option::of(prop::collection::vec(0.0f64..=1.0, k)),
                0.001f64..=1.0,
            )
                .prop_map(move |(arms, chosen, reward, hidden, prop)| {
                    let arms = arms
                        .into_iter()
                        .enumerate()
                        .map(|(i, (x, z))| Arm {
                            id: ArmId::new(format!("arm \"{i}\"")),
                            x: FeatureVector::new(x).unwrap(),
                            z: zk.map(|_| FeatureVector::new(z).unwrap()),
                        })
                        .collect();
                    let ctx = TrialContext::new(arms).unwrap();
                    let chosen = ctx.arms()[chosen].id.clone();
                    LoggedEvent::new(ctx, chosen, reward, Some(prop), hidden).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_serialize_is_identity(ev in arb_event()) {
            let line = serialize_event(&ev);
            let parsed = parse_event_line(&line).unwrap();
            prop_assert_eq!(&parsed, &ev);
            prop_assert_eq!(serialize_event(&parsed), line);
        }
    }
}
