//! Reference denoiser plugin used to exercise the plugin protocol.
//!
//! Usage: `doamp-refplugin MODE [ARG]` with MODE one of
//! `echo`, `zero`, `scale K`, `soft [MULT]`, `wrong-length`, `bad-magic`,
//! `sleep SECS`, `fail`, `dims`.

use std::io::{self, Write};
use std::process::ExitCode;
use std::time::Duration;

use doamp_core::denoisers::plugin::{read_request, write_response};
use doamp_core::denoisers::soft_threshold;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mode = args.next().unwrap_or_else(|| "echo".into());
    let arg = args.next();

    let stdin = io::stdin();
    let (sigma, r) = match read_request(stdin.lock()) {
        Ok(req) => req,
        Err(e) => {
            eprintln!("refplugin: {e}");
            return ExitCode::from(1);
        }
    };
    let out = io::stdout();
    let mut out = out.lock();

    let written = match mode.as_str() {
        "echo" => write_response(&mut out, &r),
        "zero" => write_response(&mut out, &vec![0.0; r.len()]),
        "scale" => {
            let k: f64 = arg.and_then(|a| a.parse().ok()).unwrap_or(1.0);
            write_response(&mut out, &r.iter().map(|v| k * v).collect::<Vec<_>>())
        }
        "soft" => {
            let multiple: f64 = arg.and_then(|a| a.parse().ok()).unwrap_or(1.0);
            write_response(&mut out, &soft_threshold(&r, multiple * sigma))
        }
        "wrong-length" => write_response(&mut out, &r[..r.len().saturating_sub(1)]),
        "bad-magic" => {
            let mut bytes = Vec::new();
            write_response(&mut bytes, &r).ok();
            bytes[..4].copy_from_slice(b"XXXX");
            out.write_all(&bytes)
        }
        "sleep" => {
            let secs: f64 = arg.and_then(|a| a.parse().ok()).unwrap_or(10.0);
            std::thread::sleep(Duration::from_secs_f64(secs));
            write_response(&mut out, &r)
        }
        "fail" => return ExitCode::from(1),
        // Replies with [IMG_W, IMG_H, 0, ...] so callers can check the environment.
        "dims" => {
            let read = |k: &str| {
                std::env::var(k)
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(-1.0)
            };
            let mut v = vec![0.0; r.len()];
            if v.len() >= 2 {
                v[0] = read("IMG_W");
                v[1] = read("IMG_H");
            }
            write_response(&mut out, &v)
        }
        other => {
            eprintln!("refplugin: unknown mode {other}");
            return ExitCode::from(2);
        }
    };
    match written.and_then(|_| out.flush()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("refplugin: {e}");
            ExitCode::from(1)
        }
    }
}
