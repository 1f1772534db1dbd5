//! PNML export and import of workflow nets.
//!
//! Silent transitions carry the ProM `$invisible$` marker; high-level
//! lifecycles are kept in a tool-specific element so that abstracted models
//! can be read back and replayed against abstracted logs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use quick_xml::escape::{escape, resolve_xml_entity};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::log::{Activity, Lifecycle};

use super::petri::PetriNet;

const TOOL: &str = "ppdisc";

pub fn write_pnml<W: Write>(net: &PetriNet, mut w: W) -> Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, "<pnml>")?;
    writeln!(
        w,
        r#"  <net id="net1" type="http://www.pnml.org/version-2009/grammar/pnmlcoremodel">"#
    )?;
    writeln!(w, r#"    <page id="page1">"#)?;
    for (i, name) in net.places.iter().enumerate() {
        writeln!(w, r#"      <place id="p{i}">"#)?;
        writeln!(w, "        <name><text>{}</text></name>", escape(name.as_str()))?;
        if i == net.source {
            writeln!(w, "        <initialMarking><text>1</text></initialMarking>")?;
        }
        writeln!(w, "      </place>")?;
    }
    for (i, t) in net.transitions.iter().enumerate() {
        writeln!(w, r#"      <transition id="t{i}">"#)?;
        match &t.label {
            Some(a) => {
                writeln!(w, "        <name><text>{}</text></name>", escape(a.name()))?;
                if let Some(lc) = a.lifecycle().xes_value() {
                    writeln!(
                        w,
                        r#"        <toolspecific tool="{TOOL}" version="1" lifecycle="{lc}"/>"#
                    )?;
                }
            }
            None => {
                writeln!(w, "        <name><text>tau</text></name>")?;
                writeln!(
                    w,
                    r#"        <toolspecific tool="ProM" version="6.4" activity="$invisible$" localNodeID="t{i}"/>"#
                )?;
            }
        }
        writeln!(w, "      </transition>")?;
    }
    let mut arc = 0;
    for (i, t) in net.transitions.iter().enumerate() {
        for &p in &t.inputs {
            writeln!(w, r#"      <arc id="a{arc}" source="p{p}" target="t{i}"/>"#)?;
            arc += 1;
        }
        for &p in &t.outputs {
            writeln!(w, r#"      <arc id="a{arc}" source="t{i}" target="p{p}"/>"#)?;
            arc += 1;
        }
    }
    writeln!(w, "    </page>")?;
    writeln!(w, "    <finalmarkings>")?;
    writeln!(w, "      <marking>")?;
    writeln!(
        w,
        r#"        <place idref="p{}"><text>1</text></place>"#,
        net.sink
    )?;
    writeln!(w, "      </marking>")?;
    writeln!(w, "    </finalmarkings>")?;
    writeln!(w, "  </net>")?;
    writeln!(w, "</pnml>")?;
    Ok(())
}

#[derive(Default)]
struct RawTransition {
    id: String,
    name: Option<String>,
    invisible: bool,
    lifecycle: Lifecycle,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Place,
    Transition,
    FinalMarking,
    Other,
}

fn attr(e: &BytesStart<'_>, key: &[u8]) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Pnml(err.to_string()))?;
        if a.key.local_name().as_ref() == key {
            let v = a
                .unescape_value()
                .map_err(|err| Error::Pnml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// Reads a net written by [`write_pnml`] or by common tools. The source is
/// the place with an initial token; the sink is taken from the final marking
/// or else the unique place without outgoing arcs.
pub fn parse_pnml<R: Read>(r: R) -> Result<PetriNet> {
    let mut xml = Reader::from_reader(BufReader::new(r));
    parse_inner(&mut xml)
}

fn parse_inner<B: BufRead>(xml: &mut Reader<B>) -> Result<PetriNet> {
    let mut buf = Vec::new();
    let mut ctx: Vec<Ctx> = Vec::new();
    let mut path: Vec<Vec<u8>> = Vec::new();

    let mut places: Vec<(String, String, u32)> = Vec::new();
    let mut transitions: Vec<RawTransition> = Vec::new();
    let mut arcs: Vec<(String, String)> = Vec::new();
    let mut final_place: Option<String> = None;
    let mut text = String::new();

    loop {
        let ev = xml
            .read_event_into(&mut buf)
            .map_err(|e| Error::Pnml(format!("{e} at byte {}", xml.error_position())))?;
        let (start, empty) = match &ev {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = start {
            text.clear();
            let name = e.local_name().as_ref().to_vec();
            let cur = ctx.last().copied().unwrap_or(Ctx::Other);
            let mut next = cur;
            match name.as_slice() {
                b"place" if cur == Ctx::FinalMarking => {
                    final_place = attr(&e, b"idref")?;
                }
                b"place" => {
                    let id = attr(&e, b"id")?.ok_or_else(|| Error::Pnml("place without id".into()))?;
                    places.push((id.clone(), id, 0));
                    next = Ctx::Place;
                }
                b"transition" => {
                    let id =
                        attr(&e, b"id")?.ok_or_else(|| Error::Pnml("transition without id".into()))?;
                    transitions.push(RawTransition {
                        id,
                        ..Default::default()
                    });
                    next = Ctx::Transition;
                }
                b"arc" => {
                    let s = attr(&e, b"source")?.ok_or_else(|| Error::Pnml("arc without source".into()))?;
                    let t = attr(&e, b"target")?.ok_or_else(|| Error::Pnml("arc without target".into()))?;
                    arcs.push((s, t));
                }
                b"finalmarkings" => next = Ctx::FinalMarking,
                b"toolspecific" if cur == Ctx::Transition => {
                    let tr = transitions.last_mut().unwrap();
                    if attr(&e, b"activity")?.as_deref() == Some("$invisible$") {
                        tr.invisible = true;
                    }
                    if let Some(lc) = attr(&e, b"lifecycle")? {
                        tr.lifecycle = Lifecycle::from_xes_value(&lc);
                    }
                }
                _ => {}
            }
            if !empty {
                ctx.push(next);
                path.push(name);
            }
        } else if let Event::Text(t) = &ev {
            text.push_str(&t.decode().map_err(|e| Error::Pnml(e.to_string()))?);
        } else if let Event::GeneralRef(r) = &ev {
            let resolved = match r.resolve_char_ref().map_err(|e| Error::Pnml(e.to_string()))? {
                Some(c) => c.to_string(),
                None => {
                    let name = r.decode().map_err(|e| Error::Pnml(e.to_string()))?;
                    resolve_xml_entity(&name)
                        .ok_or_else(|| Error::Pnml(format!("unknown entity &{name};")))?
                        .to_string()
                }
            };
            text.push_str(&resolved);
        } else if let Event::End(_) = &ev {
            let n = path.len();
            if n >= 2 && path[n - 1] == b"text" {
                let value = std::mem::take(&mut text);
                let parent = path[n - 2].as_slice();
                match (ctx.get(n - 2).copied(), parent) {
                    (Some(Ctx::Place), b"name") => places.last_mut().unwrap().1 = value,
                    (Some(Ctx::Place), b"initialMarking") => {
                        places.last_mut().unwrap().2 = value
                            .trim()
                            .parse()
                            .map_err(|_| Error::Pnml(format!("bad initial marking '{value}'")))?;
                    }
                    (Some(Ctx::Transition), b"name") => {
                        transitions.last_mut().unwrap().name = Some(value)
                    }
                    _ => {}
                }
            }
            text.clear();
            ctx.pop();
            path.pop();
        } else if let Event::Eof = ev {
            break;
        }
        buf.clear();
    }

    let mut net = PetriNet {
        places: Vec::new(),
        transitions: Vec::new(),
        source: usize::MAX,
        sink: usize::MAX,
    };
    let mut place_idx: HashMap<String, usize> = HashMap::new();
    for (id, name, tokens) in &places {
        let i = net.add_place(name.clone());
        place_idx.insert(id.clone(), i);
        if *tokens > 0 {
            if net.source != usize::MAX {
                return Err(Error::Pnml("more than one marked place".into()));
            }
            net.source = i;
        }
    }
    let mut trans_idx: HashMap<String, usize> = HashMap::new();
    for t in &transitions {
        let label = if t.invisible {
            None
        } else {
            let name = t.name.clone().unwrap_or_else(|| t.id.clone());
            Some(Activity::with_lifecycle(name, t.lifecycle))
        };
        let i = net.add_transition(label, Vec::new(), Vec::new());
        net.transitions[i].name = t.id.clone();
        trans_idx.insert(t.id.clone(), i);
    }
    for (s, t) in &arcs {
        match (place_idx.get(s), trans_idx.get(t), trans_idx.get(s), place_idx.get(t)) {
            (Some(&p), Some(&tr), _, _) => net.transitions[tr].inputs.push(p),
            (_, _, Some(&tr), Some(&p)) => net.transitions[tr].outputs.push(p),
            _ => return Err(Error::Pnml(format!("arc {s} -> {t} does not join a place and a transition"))),
        }
    }
    if net.source == usize::MAX {
        return Err(Error::Pnml("no initially marked place".into()));
    }
    net.sink = match final_place {
        Some(id) => *place_idx
            .get(&id)
            .ok_or_else(|| Error::Pnml(format!("final marking names unknown place {id}")))?,
        None => {
            let sinks: Vec<usize> = (0..net.places.len())
                .filter(|&p| !net.transitions.iter().any(|t| t.inputs.contains(&p)))
                .collect();
            match sinks.as_slice() {
                [p] => *p,
                _ => return Err(Error::Pnml("cannot determine the sink place".into())),
            }
        }
    };
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::tree::ProcessTree;
    use crate::discovery::tree_to_petri;

    #[test]
    fn round_trip() {
        let mut tree: ProcessTree = "->('a', X(tau, +('b', 'c')), *('d', 'e'))".parse().unwrap();
        if let ProcessTree::Node(_, ch) = &mut tree {
            ch.push(ProcessTree::Leaf(Activity::with_lifecycle("S & T", Lifecycle::Start)));
        }
        let net = tree_to_petri(&tree);
        let mut buf = Vec::new();
        write_pnml(&net, &mut buf).unwrap();
        let back = parse_pnml(buf.as_slice()).unwrap();
        assert_eq!(back.places, net.places);
        assert_eq!(back.source, net.source);
        assert_eq!(back.sink, net.sink);
        assert_eq!(back.transitions.len(), net.transitions.len());
        for (a, b) in back.transitions.iter().zip(&net.transitions) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.inputs, b.inputs);
            assert_eq!(a.outputs, b.outputs);
        }
    }

    #[test]
    fn malformed_rejected() {
        assert!(parse_pnml(&b"<pnml><net><page><place id=\"p\"/></page></net></pnml>"[..]).is_err());
        assert!(parse_pnml(&b"<pnml><net"[..]).is_err());
    }
}
