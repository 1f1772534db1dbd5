use std::io::{Read, Write};

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::log::{Activity, EventLog, Lifecycle, Trace};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct XesOptions {
    /// Keep `lifecycle:transition` values `start`/`complete` on events.
    /// Raw logs are imported with every event atomic; partition output needs
    /// this switched on to read its own high-level lifecycles back.
    pub read_lifecycle: bool,
}

impl XesOptions {
    pub fn with_lifecycle() -> Self {
        XesOptions {
            read_lifecycle: true,
        }
    }
}

/// Parses an XES document with raw-import options (lifecycles ignored).
pub fn parse_xes<R: Read>(reader: R) -> Result<EventLog> {
    parse_xes_with(reader, &XesOptions::default())
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Elem {
    Log,
    Trace,
    Event,
    Other,
}

#[derive(Default)]
struct PendingEvent {
    name: Option<String>,
    lifecycle: Option<String>,
}

pub fn parse_xes_with<R: Read>(mut reader: R, opts: &XesOptions) -> Result<EventLog> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let line_at = |pos: u64| -> usize {
        let end = (pos as usize).min(bytes.len());
        bytes[..end].iter().filter(|&&b| b == b'\n').count() + 1
    };

    let mut xml = Reader::from_reader(bytes.as_slice());
    xml.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut stack: Vec<Elem> = Vec::new();
    let mut log = EventLog::new();
    let mut trace: Option<Trace> = None;
    let mut event: Option<PendingEvent> = None;
    let mut trace_index = 0usize;
    let mut saw_log = false;

    loop {
        let pos = xml.buffer_position();
        let ev = xml.read_event_into(&mut buf).map_err(|e| Error::Xes {
            line: line_at(xml.error_position()),
            message: e.to_string(),
        })?;
        match ev {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(ev, Event::Empty(_));
                let parent = stack.last().copied();
                let kind = match (e.local_name().as_ref(), parent) {
                    (b"log", None) => {
                        saw_log = true;
                        Elem::Log
                    }
                    (b"trace", Some(Elem::Log)) => {
                        trace = Some(Trace::default());
                        Elem::Trace
                    }
                    (b"event", Some(Elem::Trace)) => {
                        event = Some(PendingEvent::default());
                        Elem::Event
                    }
                    (_, Some(Elem::Event)) => {
                        read_event_attribute(e, &xml, event.as_mut(), line_at(pos))?;
                        Elem::Other
                    }
                    _ => Elem::Other,
                };
                if is_empty {
                    close(
                        kind,
                        &mut log,
                        &mut trace,
                        &mut event,
                        &mut trace_index,
                        opts,
                        line_at(pos),
                    )?;
                } else {
                    stack.push(kind);
                }
            }
            Event::End(_) => {
                let kind = stack.pop().ok_or_else(|| Error::Xes {
                    line: line_at(pos),
                    message: "unbalanced closing tag".into(),
                })?;
                close(
                    kind,
                    &mut log,
                    &mut trace,
                    &mut event,
                    &mut trace_index,
                    opts,
                    line_at(pos),
                )?;
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(Error::Xes {
            line: line_at(bytes.len() as u64),
            message: "unexpected end of document".into(),
        });
    }
    if !saw_log {
        return Err(Error::Xes {
            line: 1,
            message: "no <log> root element".into(),
        });
    }
    Ok(log)
}

fn read_event_attribute(
    e: &BytesStart<'_>,
    xml: &Reader<&[u8]>,
    event: Option<&mut PendingEvent>,
    line: usize,
) -> Result<()> {
    let Some(event) = event else { return Ok(()) };
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::Xes {
            line,
            message: err.to_string(),
        })?;
        let v = attr
            .decode_and_unescape_value(xml.decoder())
            .map_err(|err| Error::Xes {
                line,
                message: err.to_string(),
            })?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    match key.as_deref() {
        Some("concept:name") => event.name = value,
        Some("lifecycle:transition") => event.lifecycle = value,
        _ => {}
    }
    Ok(())
}

fn close(
    kind: Elem,
    log: &mut EventLog,
    trace: &mut Option<Trace>,
    event: &mut Option<PendingEvent>,
    trace_index: &mut usize,
    opts: &XesOptions,
    line: usize,
) -> Result<()> {
    match kind {
        Elem::Event => {
            let pending = event.take().unwrap_or_default();
            let name = pending.name.ok_or_else(|| Error::Xes {
                line,
                message: format!("event in trace #{} has no concept:name", *trace_index),
            })?;
            let lifecycle = match (&pending.lifecycle, opts.read_lifecycle) {
                (Some(v), true) => Lifecycle::from_xes_value(v),
                _ => Lifecycle::Atomic,
            };
            let activity = Activity::with_lifecycle(name, lifecycle);
            activity.validate_event().map_err(|e| Error::Xes {
                line,
                message: format!("trace #{}: {e}", *trace_index),
            })?;
            if let Some(t) = trace.as_mut() {
                t.push(activity);
            }
        }
        Elem::Trace => {
            let t = trace.take().unwrap_or_default();
            if t.is_empty() {
                return Err(Error::Xes {
                    line,
                    message: format!("trace #{} has no events", *trace_index),
                });
            }
            log.add(t, 1);
            *trace_index += 1;
        }
        Elem::Log | Elem::Other => {}
    }
    Ok(())
}

/// Writes the log as XES, one `<trace>` element per case (multiplicities
/// expanded). Non-atomic lifecycles become `lifecycle:transition`.
pub fn write_xes<W: Write>(log: &EventLog, mut w: W) -> Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<log xes.version="1.0" xes.features="" xmlns="http://www.xes-standard.org/">"#
    )?;
    writeln!(
        w,
        r#"  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>"#
    )?;
    writeln!(
        w,
        r#"  <extension name="Lifecycle" prefix="lifecycle" uri="http://www.xes-standard.org/lifecycle.xesext"/>"#
    )?;
    let mut case = 0usize;
    for (trace, m) in log.iter() {
        for _ in 0..m {
            case += 1;
            writeln!(w, "  <trace>")?;
            writeln!(w, r#"    <string key="concept:name" value="case_{case}"/>"#)?;
            for a in trace {
                writeln!(w, "    <event>")?;
                writeln!(
                    w,
                    r#"      <string key="concept:name" value="{}"/>"#,
                    escape(a.name())
                )?;
                if let Some(lc) = a.lifecycle().xes_value() {
                    writeln!(
                        w,
                        r#"      <string key="lifecycle:transition" value="{lc}"/>"#
                    )?;
                }
                writeln!(w, "    </event>")?;
            }
            writeln!(w, "  </trace>")?;
        }
    }
    writeln!(w, "</log>")?;
    Ok(())
}
