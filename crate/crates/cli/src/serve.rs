//! Reference external-oracle server speaking the NDJSON wire protocol.
//!
//! Replies `0.0` to every request, or evaluates a model file when one is
//! given. Serves on stdin/stdout by default or accepts TCP connections
//! sequentially with `--tcp`.

use crate::CliError;
use serde::Deserialize;
use spamrec::model::SpamModel;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

#[derive(Deserialize)]
struct Request {
    id: u64,
    x: Vec<f64>,
}

fn serve_streams(
    input: impl Read,
    mut output: impl Write,
    model: Option<&SpamModel>,
) -> std::io::Result<()> {
    let reader = BufReader::new(input);
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(trimmed) {
            Ok(req) => match model {
                None => format!("{{\"id\": {}, \"y\": 0.0}}", req.id),
                Some(m) => match m.evaluate(&req.x) {
                    Ok(v) => format!(
                        "{{\"id\": {}, \"y\": {}}}",
                        req.id,
                        serde_json::to_string(&v).unwrap()
                    ),
                    Err(e) => format!(
                        "{{\"id\": {}, \"error\": {}}}",
                        req.id,
                        serde_json::to_string(&e.to_string()).unwrap()
                    ),
                },
            },
            Err(e) => format!(
                "{{\"id\": 0, \"error\": {}}}",
                serde_json::to_string(&format!("bad request: {e}")).unwrap()
            ),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

/// Runs the echo server until end of input (stdio) or forever (TCP).
pub fn serve_echo(model_path: Option<&str>, tcp: Option<&str>) -> Result<(), CliError> {
    let model = match model_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("read model {p}: {e}")))?;
            Some(SpamModel::from_json(&text)?)
        }
        None => None,
    };
    match tcp {
        None => {
            serve_streams(std::io::stdin().lock(), std::io::stdout().lock(), model.as_ref())?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr)?;
            eprintln!("serve-echo listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let reader = stream.try_clone()?;
                // one connection at a time; enough for loopback testing
                if let Err(e) = serve_streams(reader, stream, model.as_ref()) {
                    eprintln!("connection ended: {e}");
                }
            }
        }
    }
    Ok(())
}
