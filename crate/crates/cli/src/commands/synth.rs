//! `stoloc synth-images`: two-class synthetic RGB textures.

use std::io::Write;

use stoloc::output::write_json;
use stoloc::synth::{synth_images, write_images_binary, write_images_csv};

use crate::error::{CliError, CliResult};
use crate::{Format, Settings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthArgs {
    pub width: usize,
    pub height: usize,
    pub count: usize,
    pub binary: bool,
}

pub fn run(settings: &Settings, args: SynthArgs) -> CliResult<()> {
    if args.width == 0 || args.height == 0 {
        return Err(CliError::Usage(format!("image size {}x{} must be at least 1x1", args.width, args.height)));
    }
    let images = synth_images(args.width, args.height, args.count, settings.config.seed)?;
    let header = settings
        .header("synth-images")
        .with("width", args.width)
        .with("height", args.height)
        .with("count", args.count)
        .with("layout", "row-major (i2, i1, channel)");
    match settings.format {
        Format::Csv => write_images_csv(&header, settings.create("images", "csv")?, &images)?,
        Format::Json => write_json(&header, settings.create("images", "json")?, &images)?,
    }
    if args.binary {
        write_images_binary(settings.create("images", "bin")?, &images)?;
        // The raw array has no room for text, so its header lives alongside it.
        let mut meta = settings.create("images.bin", "header")?;
        header.clone().with("dtype", "f64 little-endian").write(&mut meta)?;
        meta.flush()?;
    }
    let red = images.iter().filter(|im| im.red).count();
    println!("{} images ({} red, {} blue)", images.len(), red, images.len() - red);
    Ok(())
}
