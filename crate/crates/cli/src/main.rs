//! `spe`: fit spline-encoded neural fields to point clouds, images and SDFs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input parse error.

mod args;
mod commands;
mod error;
mod manifest;
mod shape;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ShapeSpaceCommand};

fn main() -> ExitCode {
    // clap exits with code 2 on bad flags.
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    let result = match &cli.command {
        Command::MakeFixture(a) => commands::make_fixture(a),
        Command::FitSdf(a) => commands::fit_sdf(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::FitImage(a) => commands::fit_image_cmd(a),
        Command::RenderImage(a) => commands::render_image_cmd(a),
        Command::RegressSdf(a) => commands::regress_sdf_cmd(a),
        Command::ShapeSpace(ShapeSpaceCommand::Train(a)) => commands::shape_space_train(a),
        Command::ShapeSpace(ShapeSpaceCommand::Fit(a)) => commands::shape_space_fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
