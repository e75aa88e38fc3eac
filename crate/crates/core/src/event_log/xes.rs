//! Minimal XES reader. Only the `concept:name` attribute of events is
//! read; traces keep document order and identical traces are merged.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{Activity, EventLog, LogError, Trace};

fn local_name(e: &BytesStart<'_>) -> Vec<u8> {
    e.local_name().as_ref().to_vec()
}

fn concept_name(e: &BytesStart<'_>) -> Result<Option<String>, LogError> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| LogError::Xes(err.to_string()))?;
        match attr.key.as_ref() {
            b"key" => key = Some(attr.unescape_value().map_err(|e| LogError::Xes(e.to_string()))?),
            b"value" => {
                value = Some(attr.unescape_value().map_err(|e| LogError::Xes(e.to_string()))?)
            }
            _ => {}
        }
    }
    Ok(match (key, value) {
        (Some(k), Some(v)) if k == "concept:name" => Some(v.into_owned()),
        _ => None,
    })
}

pub fn parse_xes(document: &[u8]) -> Result<EventLog, LogError> {
    let mut reader = Reader::from_reader(document);
    reader.config_mut().trim_text(true);
    reader.config_mut().check_end_names = true;

    let mut log = EventLog::new();
    let mut buf = Vec::new();
    let mut trace_index = 0usize;
    let mut current: Option<Vec<Activity>> = None;
    // name of the event being read, and whether we are inside one
    let mut event: Option<Option<String>> = None;
    // nesting depth inside an event, so nested attributes are skipped
    let mut event_depth = 0usize;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| LogError::Xes(format!("malformed XML at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            Event::Start(e) => {
                let name = local_name(&e);
                if let Some(ev_name) = event.as_mut() {
                    if event_depth == 0 && ev_name.is_none() && name == b"string" {
                        *ev_name = concept_name(&e)?;
                    }
                    event_depth += 1;
                } else if name == b"trace" {
                    current = Some(Vec::new());
                } else if name == b"event" && current.is_some() {
                    event = Some(None);
                    event_depth = 0;
                }
            }
            Event::Empty(e) => {
                let name = local_name(&e);
                if let Some(ev_name) = event.as_mut() {
                    if event_depth == 0 && ev_name.is_none() && name == b"string" {
                        *ev_name = concept_name(&e)?;
                    }
                } else if name == b"trace" {
                    log.add(Trace::empty(), 1);
                    trace_index += 1;
                } else if name == b"event" && current.is_some() {
                    return Err(LogError::Xes(format!(
                        "event without concept:name in trace {trace_index}"
                    )));
                }
            }
            Event::End(e) => {
                let name = e.local_name().as_ref().to_vec();
                if event.is_some() {
                    if event_depth > 0 {
                        event_depth -= 1;
                    } else if name == b"event" {
                        let ev_name = event.take().flatten().ok_or_else(|| {
                            LogError::Xes(format!(
                                "event without concept:name in trace {trace_index}"
                            ))
                        })?;
                        let a = Activity::new(&ev_name).map_err(|_| {
                            LogError::Xes(format!(
                                "trace {trace_index}: activity name {ev_name:?} is not a valid token"
                            ))
                        })?;
                        if let Some(t) = current.as_mut() {
                            t.push(a);
                        }
                    }
                } else if name == b"trace" {
                    if let Some(t) = current.take() {
                        log.add(Trace::new(t), 1);
                        trace_index += 1;
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if current.is_some() || event.is_some() {
        return Err(LogError::Xes("unexpected end of document".into()));
    }
    Ok(log)
}
