//! CSV serialization of traces and event lists.

use std::io::Write;

use super::Trace;

pub const TRACE_HEADER: [&str; 7] = ["t", "e1", "e2", "sigma", "u", "d", "mode"];
/// Extra columns written for each UAV channel.
pub const UAV_EXTRA_HEADER: [&str; 3] = ["ref", "pos", "vel"];

/// Writes the trace; `extended` appends the reference and plant state.
pub fn write_trace<W: Write>(trace: &Trace, w: W, extended: bool) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    if extended {
        header.extend(UAV_EXTRA_HEADER);
    }
    out.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for r in &trace.rows {
        rec.clear();
        rec.push(r.t.to_string());
        rec.push(r.e1.to_string());
        rec.push(r.e2.to_string());
        rec.push(r.sigma.map(|s| s.to_string()).unwrap_or_default());
        rec.push(r.u.to_string());
        rec.push(r.d.to_string());
        rec.push(r.mode.map(|m| m.as_str().to_string()).unwrap_or_default());
        if extended {
            rec.push(r.reference.to_string());
            rec.push(r.position.to_string());
            rec.push(r.velocity.to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(trace: &Trace, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "t"])?;
    for e in &trace.events {
        out.write_record([e.kind.as_str().to_string(), e.t.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Event, EventKind, Mode};
    use crate::sim::TraceRow;

    #[test]
    fn header_and_rows() {
        let row = TraceRow {
            t: 0.5,
            e1: 1.0,
            e2: -2.0,
            sigma: Some(0.25),
            u: 3.0,
            d: 0.0,
            mode: Some(Mode::Sliding),
            reference: 1.0,
            position: 0.0,
            velocity: 2.0,
        };
        let tr = Trace { rows: vec![row], events: vec![Event { kind: EventKind::Tc, t: 0.5 }], gain_log: vec![] };
        let mut buf = Vec::new();
        write_trace(&tr, &mut buf, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,e1,e2,sigma,u,d,mode\n0.5,1,-2,0.25,3,0,sliding\n");
        let mut buf = Vec::new();
        write_trace(&tr, &mut buf, true).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,e1,e2,sigma,u,d,mode,ref,pos,vel\n"));
        let mut buf = Vec::new();
        write_events(&tr, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "kind,t\ntc,0.5\n");
    }
}
