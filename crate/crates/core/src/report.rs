//! CSV output.
//!
//! Numbers are written in fixed notation with ten significant digits and `.`
//! as the decimal separator; rows end in `\n`. Output depends only on the
//! values, so identical results give byte-identical files.

use std::io::{self, Write};

use crate::analytics::{HeatmapCell, SweepResult};
use crate::attacks::InjectionRow;
use crate::protocol::SessionStats;

pub const SWEEP_HEADER: &str = "eps,mu,q,g,q_over_g,q_stderr,g_stderr,source";
pub const HEATMAP_HEADER: &str = "mu,eps,g,q,mode";
pub const SESSION_HEADER: &str =
    "variant,attack,eps,mu,sifted_len,z_len,x_len,qber_z,qber_x,qber_combined,gain,aborted,ci_halfwidth";
pub const INJECTION_HEADER: &str =
    "eps,offset_mv,injected_qber_x,calibrated_qber_x,calibrated_stderr,live_qber_x,live_stderr";

const SIGNIFICANT: i32 = 10;

/// Fixed-notation rendering with ten significant digits.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return format!("{:.*}", (SIGNIFICANT - 1) as usize, 0.0);
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit (9.9999999999 → 10.000000000).
    let digits = s.chars().filter(char::is_ascii_digit).count();
    let leading_zeros = s
        .trim_start_matches('-')
        .chars()
        .take_while(|&c| c == '0' || c == '.')
        .filter(|&c| c == '0')
        .count();
    if decimals > 0 && digits - leading_zeros > SIGNIFICANT as usize {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(w: &mut W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            format_number(r.eps),
            opt(r.mu),
            format_number(r.q),
            format_number(r.g),
            opt(r.q_over_g),
            format_number(r.q_stderr),
            format_number(r.g_stderr),
            r.source.as_str()
        )?;
    }
    Ok(())
}

pub fn write_heatmap_csv<W: Write>(w: &mut W, cells: &[HeatmapCell]) -> io::Result<()> {
    writeln!(w, "{HEATMAP_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_number(c.mu),
            format_number(c.eps),
            format_number(c.g),
            format_number(c.q),
            c.mode.as_str()
        )?;
    }
    Ok(())
}

/// One row per session. `attack` and `eps` describe the strategy used.
pub fn write_session_csv<W: Write>(
    w: &mut W,
    attack: &str,
    eps: Option<f64>,
    mu: f64,
    sessions: &[SessionStats],
) -> io::Result<()> {
    writeln!(w, "{SESSION_HEADER}")?;
    for s in sessions {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.variant.name(),
            attack,
            opt(eps),
            format_number(mu),
            s.sifted_len,
            s.z_len,
            s.x_len,
            format_number(s.qber_z),
            format_number(s.qber_x),
            format_number(s.qber_combined),
            format_number(s.gain),
            s.aborted,
            format_number(s.ci_halfwidth)
        )?;
    }
    Ok(())
}

pub fn write_injection_csv<W: Write>(w: &mut W, rows: &[InjectionRow]) -> io::Result<()> {
    writeln!(w, "{INJECTION_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            format_number(r.eps),
            format_number(r.offset_mv),
            format_number(r.injected_qber_x),
            format_number(r.calibrated_qber_x),
            format_number(r.calibrated_stderr),
            format_number(r.live_qber_x),
            format_number(r.live_stderr)
        )?;
    }
    Ok(())
}
