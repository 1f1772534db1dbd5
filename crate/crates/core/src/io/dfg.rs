use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::log::{Activity, Dfg, Lifecycle, Node, END_LABEL, START_LABEL};

fn node_to_fields(n: &Node) -> (String, &'static str) {
    match n {
        Node::Start => (START_LABEL.to_string(), ""),
        Node::End => (END_LABEL.to_string(), ""),
        Node::Act(a) => (a.name().to_string(), a.lifecycle().xes_value().unwrap_or("")),
    }
}

/// Writes a DFG as CSV rows `source,source_lifecycle,target,target_lifecycle,weight`.
pub fn write_dfg<W: Write>(dfg: &Dfg, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    wtr.write_record(["source", "source_lifecycle", "target", "target_lifecycle", "weight"])
        .map_err(err)?;
    for a in dfg.activities() {
        // isolated nodes are kept as zero-weight self rows
        let n = Node::Act(a);
        if dfg.outgoing(&n).next().is_none() && dfg.incoming(&n).next().is_none() {
            let (name, lc) = node_to_fields(&n);
            wtr.write_record([name.as_str(), lc, name.as_str(), lc, "0"])
                .map_err(err)?;
        }
    }
    for (a, b, weight) in dfg.edges() {
        let (an, al) = node_to_fields(a);
        let (bn, bl) = node_to_fields(b);
        wtr.write_record([an.as_str(), al, bn.as_str(), bl, &weight.to_string()])
            .map_err(err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_dfg<R: Read>(r: R) -> Result<Dfg> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut dfg = Dfg::new();
    let node = |name: &str, lc: &str| match name {
        START_LABEL => Node::Start,
        END_LABEL => Node::End,
        _ => Node::Act(Activity::with_lifecycle(name, Lifecycle::from_xes_value(lc))),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 5 {
            return Err(Error::Csv {
                row,
                message: "expected 5 fields".into(),
            });
        }
        let from = node(&rec[0], &rec[1]);
        let to = node(&rec[2], &rec[3]);
        let weight: u64 = rec[4].trim().parse().map_err(|_| Error::Csv {
            row,
            message: format!("bad weight `{}`", &rec[4]),
        })?;
        if from == Node::End || to == Node::Start {
            return Err(Error::Csv {
                row,
                message: "edge into the start node or out of the end node".into(),
            });
        }
        if weight == 0 {
            if let Node::Act(a) = from {
                dfg.add_activity(a);
            }
            continue;
        }
        dfg.add_edge(from, to, weight);
    }
    Ok(dfg)
}
