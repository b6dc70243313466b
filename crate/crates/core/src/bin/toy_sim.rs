//! Scripted child for exercising the external-simulator protocol.
//!
//! usage: modescout-toy-sim [--dim N] [--voronoi SEED] [--crash-after K]
//!                          [--delay-ms MS] [--malformed] [--err]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead, Write};
use std::time::Duration;

use modescout::benchmarks::VoronoiSystem;
use modescout::simproto::{format_modes, parse_request};
use modescout::{ModeSequence, Simulator};

fn main() {
    let mut dim = 2usize;
    let mut voronoi = None;
    let mut crash_after = None;
    let mut delay = Duration::ZERO;
    let mut malformed = false;
    let mut err = false;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut value = || args.next().and_then(|v| v.parse::<u64>().ok()).expect("numeric value");
        match a.as_str() {
            "--dim" => dim = value() as usize,
            "--voronoi" => voronoi = Some(value()),
            "--crash-after" => crash_after = Some(value()),
            "--delay-ms" => delay = Duration::from_millis(value()),
            "--malformed" => malformed = true,
            "--err" => err = true,
            other => {
                eprintln!("unknown argument {other}");
                std::process::exit(1);
            }
        }
    }
    let mut sites = voronoi.map(|seed| VoronoiSystem::make(dim, seed).expect("dimension >= 1"));

    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut served = 0u64;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line == "HELLO" {
            writeln!(out, "HELLO {dim}").unwrap();
            out.flush().unwrap();
            continue;
        }
        if crash_after.is_some_and(|k| served >= k) {
            std::process::exit(3);
        }
        served += 1;
        std::thread::sleep(delay);
        let reply = match parse_request(&line) {
            _ if malformed => "MODES a,,b".to_string(),
            _ if err => "ERR refused".to_string(),
            Ok(x) if x.len() != dim => format!("ERR expected {dim} numbers"),
            Ok(x) => match sites.as_mut() {
                Some(sys) => match sys.simulate(&x) {
                    Ok(seq) => format_modes(&seq),
                    Err(e) => format!("ERR {e}"),
                },
                None => {
                    let mut h = DefaultHasher::new();
                    for v in &x {
                        v.to_bits().hash(&mut h);
                    }
                    format_modes(&ModeSequence::new([format!("h{:x}", h.finish() % 4096)]))
                }
            },
            Err(e) => format!("ERR {e}"),
        };
        writeln!(out, "{reply}").unwrap();
        out.flush().unwrap();
    }
}
