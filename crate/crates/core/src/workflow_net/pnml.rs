//! PNML and DOT serialization.

use std::collections::HashMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{NetError, PetriNet, PlaceId, TransitionId, WorkflowNet};
use crate::event_log::Activity;

const INVISIBLE: &str = "$invisible$";

/// PNML document for `wf`. Visible transitions are named by their label;
/// silent ones keep their own name and carry an invisible tool tag. Output
/// order follows node indices, so identical nets serialize identically.
pub fn export_pnml(wf: &WorkflowNet) -> String {
    let net = &wf.net;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    out.push_str(
        "  <net id=\"net1\" type=\"http://www.pnml.org/version-2009/grammar/pnmlcoremodel\">\n",
    );
    out.push_str("    <page id=\"page1\">\n");
    for p in net.places() {
        let _ = write!(
            out,
            "      <place id=\"p{}\">\n        <name><text>{}</text></name>\n",
            p.0,
            escape(net.place_name(p))
        );
        if p == wf.source {
            out.push_str("        <initialMarking><text>1</text></initialMarking>\n");
        }
        out.push_str("      </place>\n");
    }
    for t in net.transitions() {
        let tr = net.transition(t);
        let shown = tr.label.as_ref().map_or(tr.name.as_str(), |a| a.name());
        let _ = write!(
            out,
            "      <transition id=\"t{}\">\n        <name><text>{}</text></name>\n",
            t.0,
            escape(shown)
        );
        if tr.label.is_none() {
            let _ = writeln!(
                out,
                "        <toolspecific tool=\"ProM\" version=\"6.4\" activity=\"{INVISIBLE}\" localNodeID=\"t{}\"/>",
                t.0
            );
        }
        out.push_str("      </transition>\n");
    }
    let mut arc = 0usize;
    for t in net.transitions() {
        for p in net.preset(t) {
            let _ = writeln!(out, "      <arc id=\"a{arc}\" source=\"p{}\" target=\"t{}\"/>", p.0, t.0);
            arc += 1;
        }
        for p in net.postset(t) {
            let _ = writeln!(out, "      <arc id=\"a{arc}\" source=\"t{}\" target=\"p{}\"/>", t.0, p.0);
            arc += 1;
        }
    }
    out.push_str("    </page>\n    <finalmarkings>\n      <marking>\n");
    let _ = writeln!(
        out,
        "        <place idref=\"p{}\"><text>1</text></place>",
        wf.sink.0
    );
    out.push_str("      </marking>\n    </finalmarkings>\n  </net>\n</pnml>\n");
    out
}

#[derive(Default)]
struct RawNode {
    name: Option<String>,
    marked: bool,
    invisible: bool,
}

enum Section {
    None,
    Place,
    Transition,
    FinalMarking,
}

fn attr(e: &BytesStart<'_>, key: &[u8]) -> Result<Option<String>, NetError> {
    for a in e.attributes() {
        let a = a.map_err(|err| NetError::Pnml(err.to_string()))?;
        if a.key.as_ref() == key {
            return Ok(Some(
                a.unescape_value()
                    .map_err(|err| NetError::Pnml(err.to_string()))?
                    .into_owned(),
            ));
        }
    }
    Ok(None)
}

/// Reads a PNML document. The source is the place with an initial token;
/// the sink comes from the final marking, or else is the unique place
/// without outgoing arcs.
pub fn import_pnml(document: &str) -> Result<WorkflowNet, NetError> {
    let mut reader = Reader::from_str(document);
    reader.config_mut().trim_text(true);
    let mut places: Vec<(String, RawNode)> = Vec::new();
    let mut transitions: Vec<(String, RawNode)> = Vec::new();
    let mut arcs: Vec<(String, String)> = Vec::new();
    let mut final_place: Option<String> = None;
    let mut section = Section::None;
    let mut path: Vec<Vec<u8>> = Vec::new();

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| NetError::Pnml(format!("malformed XML: {e}")))?;
        let (start, empty) = match &ev {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            let name = e.local_name().as_ref().to_vec();
            match name.as_slice() {
                b"place" => match section {
                    Section::FinalMarking => {
                        final_place = attr(&e, b"idref")?;
                    }
                    _ => {
                        let id = attr(&e, b"id")?.ok_or(NetError::Pnml("place without id".into()))?;
                        places.push((id.clone(), RawNode::default()));
                        section = Section::Place;
                    }
                },
                b"transition" => {
                    let id =
                        attr(&e, b"id")?.ok_or(NetError::Pnml("transition without id".into()))?;
                    transitions.push((id.clone(), RawNode::default()));
                    section = Section::Transition;
                }
                b"arc" => {
                    let s = attr(&e, b"source")?.ok_or(NetError::Pnml("arc without source".into()))?;
                    let t = attr(&e, b"target")?.ok_or(NetError::Pnml("arc without target".into()))?;
                    arcs.push((s, t));
                }
                b"finalmarkings" => section = Section::FinalMarking,
                b"toolspecific" => {
                    if let (Section::Transition, Some(a)) = (&section, attr(&e, b"activity")?) {
                        if a == INVISIBLE {
                            transitions.last_mut().expect("open transition").1.invisible = true;
                        }
                    }
                }
                _ => {}
            }
            if !empty {
                path.push(name);
            } else if matches!(name.as_slice(), b"place" | b"transition")
                && !matches!(section, Section::FinalMarking)
            {
                section = Section::None;
            }
            continue;
        }
        match ev {
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| NetError::Pnml(e.to_string()))?
                    .into_owned();
                let parent = path.len().checked_sub(2).map(|i| path[i].as_slice());
                let node = match &section {
                    Section::Place => places.last_mut().map(|p| &mut p.1),
                    Section::Transition => transitions.last_mut().map(|t| &mut t.1),
                    _ => None,
                };
                if let Some(node) = node {
                    match parent {
                        Some(b"name")
                            if path.len() >= 3
                                && matches!(path[path.len() - 3].as_slice(), b"place" | b"transition") =>
                        {
                            node.name = Some(text)
                        }
                        Some(b"initialMarking") => {
                            node.marked = text.trim().parse::<u64>().unwrap_or(0) > 0
                        }
                        _ => {}
                    }
                }
            }
            Event::End(e) => {
                path.pop();
                match e.local_name().as_ref() {
                    b"place" | b"transition" if !matches!(section, Section::FinalMarking) => {
                        section = Section::None
                    }
                    b"finalmarkings" => section = Section::None,
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let mut net = PetriNet::new();
    let mut ids: HashMap<String, Result<PlaceId, TransitionId>> = HashMap::new();
    let mut source = None;
    for (id, raw) in &places {
        let p = net.add_place(raw.name.clone().unwrap_or_else(|| id.clone()));
        if raw.marked {
            if source.is_some() {
                return Err(NetError::Pnml("more than one initially marked place".into()));
            }
            source = Some(p);
        }
        if ids.insert(id.clone(), Ok(p)).is_some() {
            return Err(NetError::Pnml(format!("duplicate id {id}")));
        }
    }
    for (id, raw) in &transitions {
        let name = raw.name.clone().unwrap_or_else(|| id.clone());
        let label = if raw.invisible {
            None
        } else {
            Some(Activity::new(&name).map_err(|_| {
                NetError::Pnml(format!("transition label {name:?} is not a valid activity"))
            })?)
        };
        let t = net.add_transition(name, label);
        if ids.insert(id.clone(), Err(t)).is_some() {
            return Err(NetError::Pnml(format!("duplicate id {id}")));
        }
    }
    for (s, t) in &arcs {
        let lookup = |k: &String| {
            ids.get(k)
                .copied()
                .ok_or_else(|| NetError::Pnml(format!("arc refers to unknown node {k}")))
        };
        match (lookup(s)?, lookup(t)?) {
            (Ok(p), Err(tr)) => net.add_input_arc(p, tr),
            (Err(tr), Ok(p)) => net.add_output_arc(tr, p),
            _ => return Err(NetError::Pnml(format!("arc {s} -> {t} is not bipartite"))),
        }
    }
    let source = source.ok_or(NetError::Pnml("no initially marked place".into()))?;
    let sink = match final_place {
        Some(id) => match ids.get(&id) {
            Some(Ok(p)) => *p,
            _ => return Err(NetError::Pnml(format!("final marking refers to unknown place {id}"))),
        },
        None => {
            let sinks: Vec<PlaceId> = net
                .places()
                .filter(|&p| net.place_postset(p).is_empty())
                .collect();
            match sinks.as_slice() {
                [p] => *p,
                _ => return Err(NetError::Pnml("cannot determine the sink place".into())),
            }
        }
    };
    Ok(WorkflowNet { net, source, sink })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: places as circles, transitions as boxes, silent
/// transitions filled black.
pub fn export_dot(wf: &WorkflowNet) -> String {
    let net = &wf.net;
    let mut out = String::from("digraph net {\n  rankdir=LR;\n");
    for p in net.places() {
        let token = if p == wf.source { "&#9679;" } else { "" };
        let _ = writeln!(
            out,
            "  p{} [shape=circle, label=\"{}\", xlabel=\"{}\"];",
            p.0,
            token,
            dot_escape(net.place_name(p))
        );
    }
    for t in net.transitions() {
        let tr = net.transition(t);
        match &tr.label {
            Some(a) => {
                let _ = writeln!(out, "  t{} [shape=box, label=\"{}\"];", t.0, dot_escape(a.name()));
            }
            None => {
                let _ = writeln!(
                    out,
                    "  t{} [shape=box, style=filled, fillcolor=black, label=\"\", xlabel=\"{}\"];",
                    t.0,
                    dot_escape(&tr.name)
                );
            }
        }
    }
    for t in net.transitions() {
        for p in net.preset(t) {
            let _ = writeln!(out, "  p{} -> t{};", p.0, t.0);
        }
        for p in net.postset(t) {
            let _ = writeln!(out, "  t{} -> p{};", t.0, p.0);
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::running_example;
    use super::*;

    #[test]
    fn pnml_round_trip() {
        let w = running_example();
        let doc = export_pnml(&w);
        let back = import_pnml(&doc).unwrap();
        assert_eq!(back.net.canonical_form(), w.net.canonical_form());
        assert_eq!(back.net.place_name(back.source), "start");
        assert_eq!(back.net.place_name(back.sink), "end");
        assert_eq!(export_pnml(&back), doc);
    }

    #[test]
    fn silent_transitions_survive() {
        let mut w = running_example();
        let tau = w.net.add_transition("skip", None);
        w.net.add_input_arc(w.source, tau);
        w.net.add_output_arc(tau, w.sink);
        let back = import_pnml(&export_pnml(&w)).unwrap();
        assert_eq!(back.net.canonical_form(), w.net.canonical_form());
        assert!(back.net.transition(tau).label.is_none());
    }

    #[test]
    fn bad_documents() {
        assert!(import_pnml("<pnml><net>").is_err());
        let no_marking = r#"<pnml><net><page><place id="p"/></page></net></pnml>"#;
        assert!(matches!(import_pnml(no_marking), Err(NetError::Pnml(_))));
        let dangling = r#"<pnml><net><page>
<place id="p"><initialMarking><text>1</text></initialMarking></place>
<arc id="a" source="p" target="t9"/></page></net></pnml>"#;
        assert!(import_pnml(dangling).unwrap_err().to_string().contains("t9"));
    }

    #[test]
    fn dot_shapes() {
        let dot = export_dot(&running_example());
        assert!(dot.contains("p0 [shape=circle"));
        assert!(dot.contains("t0 [shape=box, label=\"a\"]"));
        assert!(dot.contains("p0 -> t0;"));
    }
}
