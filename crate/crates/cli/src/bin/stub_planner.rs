//! Test planner speaking the wire protocol on stdin/stdout, or on a TCP
//! port with `--listen`. Misbehaving modes exercise the agent's failure
//! handling.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use side_core::decide::{plan_scripted, plan_to_wire, PlannerQuery};

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Answer with the built-in scripted planner.
    Scripted,
    /// Answer with a line that is not a valid plan.
    Malformed,
    /// Never answer.
    Timeout,
    /// Answer with a plan naming an action outside the catalog.
    UnknownAction,
    /// Answer with an error object.
    Error,
}

#[derive(Parser)]
#[command(name = "side-stub-planner")]
struct Args {
    #[arg(long, value_enum, default_value = "scripted")]
    mode: Mode,
    /// Serve TCP on this address instead of stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
}

fn answer(mode: Mode, line: &str) -> Option<String> {
    match mode {
        Mode::Timeout => {
            std::thread::sleep(Duration::from_secs(3600));
            None
        }
        Mode::Malformed => Some(r#"{"steps":[{"action":"Wait","args":[]},{"action":"#.into()),
        Mode::UnknownAction => Some(r#"{"steps":[{"action":"Wait","args":[]},{"action":"Teleport","args":["robot"]}]}"#.into()),
        Mode::Error => Some(r#"{"error":"stub refuses"}"#.into()),
        Mode::Scripted => Some(match PlannerQuery::parse_wire(line) {
            Ok(q) => match plan_scripted(&q) {
                Ok(plan) => plan_to_wire(&plan),
                Err(e) => format!("{{\"error\":{}}}", quote(&e.to_string())),
            },
            Err(e) => format!("{{\"error\":{}}}", quote(&e)),
        }),
    }
}

fn quote(s: &str) -> String {
    let escaped: String = s
        .chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            c if c.is_control() => vec![' '],
            c => vec![c],
        })
        .collect();
    format!("\"{escaped}\"")
}

fn serve(mode: Mode, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(reply) = answer(mode, &line) {
            writeln!(output, "{reply}")?;
            output.flush()?;
        }
    }
    Ok(())
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    match args.listen {
        None => serve(args.mode, io::stdin().lock(), io::stdout().lock()),
        Some(addr) => {
            let listener = TcpListener::bind(&addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let reader = BufReader::new(stream.try_clone()?);
                // one query per connection
                let mut line = String::new();
                let mut reader = reader;
                if reader.read_line(&mut line)? == 0 {
                    continue;
                }
                if let Some(reply) = answer(args.mode, line.trim_end()) {
                    writeln!(&stream, "{reply}")?;
                }
            }
            Ok(())
        }
    }
}
