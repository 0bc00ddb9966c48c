//! `ssc` command-line pipeline: completion-label aggregation and
//! rectification, distillation loss, evaluation, gradient checks and a
//! synthetic demo.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input or usage error.

pub mod args;
mod commands;
pub mod config;
pub mod gradcheck;
pub mod sequence;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use args::{Cli, Command};
use commands::{Ctx, DemoArgs, Outcome};
use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(
    args: I,
    env_threads: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let cfg = match RunConfig::resolve(
        cli.global.config.as_deref(),
        &cli.global.overrides(),
        env_threads,
    ) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_INPUT;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(
                err,
                "error: cannot start {} worker threads: {e}",
                cfg.threads
            );
            return EXIT_INPUT;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(&cli.command, &cfg, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::VerificationFailed) => EXIT_VERIFY,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
    }
}

/// [`run_with`] on the process arguments, stdout, stderr and `SSC_THREADS`.
pub fn run() -> i32 {
    let env = std::env::var("SSC_THREADS").ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    run_with(std::env::args_os(), env.as_deref(), &mut out, &mut err)
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut Vec<u8>) -> anyhow::Result<Outcome> {
    let ctx = Ctx { cfg, out };
    match command {
        Command::Aggregate {
            sequence,
            start,
            frames,
            out,
            remap,
        } => commands::aggregate(ctx, sequence, *start, *frames, out, remap.map(Into::into)),
        Command::Rectify {
            grid,
            sequence,
            frame,
            out,
            remap,
        } => commands::rectify(ctx, grid, sequence, *frame, out, remap.map(Into::into)),
        Command::Eval { pred, gt } => commands::eval(ctx, pred, gt),
        Command::Dskd {
            student,
            teacher,
            max_rows,
        } => commands::dskd(ctx, student, teacher, *max_rows),
        Command::Gradcheck {
            cases,
            inject_fault,
        } => commands::gradcheck(ctx, *cases, *inject_fault),
        Command::Demo {
            script,
            empty,
            channels,
            weights,
            out,
        } => commands::demo(
            ctx,
            DemoArgs {
                script: script.as_deref(),
                empty: *empty,
                channels: *channels,
                weights: weights.as_deref(),
                out: out.as_deref(),
            },
        ),
        Command::Synth {
            out,
            script,
            frames,
            moving,
        } => commands::synth(ctx, out, script.as_deref(), *frames, *moving),
    }
}
