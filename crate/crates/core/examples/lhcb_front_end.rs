//! Turns a synthetic two-tone signal into log Bark filter-bank frames and
//! stacks them into context windows.
//!
//! ```text
//! cargo run --example lhcb_front_end
//! ```

use cmdnn::features::{lhcb_frames, stack_context, AudioSignal, FilterBank, LhcbConfig};

fn main() -> cmdnn::Result<()> {
    let sr = 16_000;
    let samples = (0..sr as usize / 2)
        .map(|n| {
            let t = n as f64 / sr as f64;
            (2.0 * std::f64::consts::PI * 300.0 * t).sin() + 0.5 * (2.0 * std::f64::consts::PI * 2500.0 * t).sin()
        })
        .collect();
    let signal = AudioSignal::new(samples, sr)?;
    let cfg = LhcbConfig::default();

    let fb = FilterBank::bark(cfg.n_filters, sr, 257)?;
    let centers: Vec<String> = fb.centers_hz().iter().map(|c| format!("{c:.0}")).collect();
    println!("filter centers (Hz): {}", centers.join(" "));

    let frames = lhcb_frames(&signal, &cfg)?;
    let coeffs: Vec<String> = frames[10].iter().map(|c| format!("{c:.1}")).collect();
    println!("{} frames; frame 10: {}", frames.len(), coeffs.join(" "));

    let windows = stack_context(&frames, cfg.context)?;
    println!("{} context windows of {} values", windows.len(), windows[0].len());
    Ok(())
}
