//! Text model files: a header, the extraction parameters, then one record
//! per ensemble member in ensemble order, closed by an `end` line.
//!
//! ```text
//! lbboost-model 1
//! members 2
//! extraction method=llm smoothing_radius=1 kde_radius=4e0 threshold=0e0
//! member feature=haar2:h:3:2:0:-1:1:1 seed=7 draw=41 theta=... alpha=... shift=... kernel=quadratic:5.0 mode=unique
//! end
//! ```
//!
//! Reals use 17 significant digits so parameters round-trip bit for bit.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::boost::Ensemble;
use crate::error::{Error, Result};
use crate::extract::ExtractionParams;
use crate::features::{FeatureDescriptor, Geometry, Lineage};
use crate::hos::HosHypothesis;

use super::{read_text, write_text};

const MAGIC: &str = "lbboost-model 1";

/// Formats a real so that parsing it back yields the same bits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Compact `kind:orientation:cell_w:cell_h:offset_x:offset_y:scale:polarity`.
pub fn format_descriptor(d: &FeatureDescriptor) -> String {
    format!(
        "{}:{}:{}:{}:{}:{}:{}:{}",
        d.kind.tag(),
        d.orientation.tag(),
        d.geometry.cell_w,
        d.geometry.cell_h,
        d.geometry.offset_x,
        d.geometry.offset_y,
        d.scale,
        d.polarity
    )
}

pub fn parse_descriptor(s: &str, lineage: Lineage) -> std::result::Result<FeatureDescriptor, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, orientation, cw, ch, ox, oy, scale, polarity] = parts[..] else {
        return Err(format!("feature `{s}` needs 8 colon-separated fields"));
    };
    fn num<T: FromStr>(token: &str, name: &str) -> std::result::Result<T, String> {
        token.parse().map_err(|_| format!("bad {name} `{token}`"))
    }
    let polarity: i8 = num(polarity, "polarity")?;
    if polarity != 1 && polarity != -1 {
        return Err(format!("polarity must be ±1, got {polarity}"));
    }
    Ok(FeatureDescriptor {
        kind: kind.parse()?,
        orientation: orientation.parse()?,
        geometry: Geometry {
            cell_w: num(cw, "cell width")?,
            cell_h: num(ch, "cell height")?,
            offset_x: num(ox, "x offset")?,
            offset_y: num(oy, "y offset")?,
        },
        scale: num(scale, "scale")?,
        polarity,
        lineage,
    })
}

pub fn format_model(ensemble: &Ensemble) -> String {
    let x = &ensemble.extraction;
    let mut out = format!(
        "{MAGIC}\nmembers {}\nextraction method={} smoothing_radius={} kde_radius={} threshold={}\n",
        ensemble.members.len(),
        x.method,
        x.smoothing_radius,
        format_real(x.kde_radius),
        format_real(x.threshold)
    );
    for m in &ensemble.members {
        out.push_str(&format!(
            "member feature={} seed={} draw={} theta={} alpha={} shift={} kernel={} mode={}\n",
            format_descriptor(&m.feature),
            m.feature.lineage.seed,
            m.feature.lineage.draw,
            format_real(m.threshold),
            format_real(m.alpha),
            format_real(m.shift),
            m.kernel,
            m.mode
        ));
    }
    out.push_str("end\n");
    out
}

/// `key=value` tokens of one record after its leading keyword.
struct Record<'a> {
    line: usize,
    fields: HashMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn parse(line: usize, rest: &'a str) -> std::result::Result<Self, String> {
        let mut fields = HashMap::new();
        for token in rest.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| format!("token `{token}` is not key=value"))?;
            if fields.insert(k, v).is_some() {
                return Err(format!("duplicate key `{k}`"));
            }
        }
        Ok(Self { line, fields })
    }

    fn get<T: FromStr>(&self, key: &str) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.fields.get(key).ok_or_else(|| format!("missing `{key}`"))?;
        v.parse().map_err(|e| format!("bad `{key}` value `{v}`: {e}"))
    }

    fn real(&self, key: &str) -> std::result::Result<f64, String> {
        let v: f64 = self.get(key)?;
        if v.is_nan() {
            return Err(format!("`{key}` is NaN"));
        }
        Ok(v)
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<Ensemble> {
    let err = |line: usize, m: String| Error::parse(path, line, m);
    let lines: Vec<&str> = text.lines().collect();
    let mut next = 0usize;
    let mut take = |what: &str| -> Result<(usize, &str)> {
        let n = next;
        next += 1;
        lines
            .get(n)
            .map(|l| (n + 1, l.trim()))
            .ok_or_else(|| Error::parse(path, n + 1, format!("file ends before {what}")))
    };

    let (line, header) = take("the header")?;
    if header != MAGIC {
        return Err(err(line, format!("expected `{MAGIC}`")));
    }
    let (line, count) = take("the member count")?;
    let count: usize = count
        .strip_prefix("members ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| err(line, "expected `members <count>`".into()))?;

    let (line, extraction) = take("the extraction record")?;
    let rest = extraction
        .strip_prefix("extraction")
        .ok_or_else(|| err(line, "expected an extraction record".into()))?;
    let extraction = (|| -> std::result::Result<ExtractionParams, String> {
        let r = Record::parse(line, rest)?;
        Ok(ExtractionParams {
            method: r.get("method")?,
            smoothing_radius: r.get("smoothing_radius")?,
            kde_radius: r.real("kde_radius")?,
            threshold: r.real("threshold")?,
        })
    })()
    .map_err(|m| err(line, m))?;

    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, text) = take("all members are listed")?;
        let rest = text
            .strip_prefix("member")
            .ok_or_else(|| err(line, "expected a member record".into()))?;
        let member = Record::parse(line, rest)
            .and_then(|r| parse_member(&r))
            .map_err(|m| err(line, m))?;
        members.push(member);
    }
    let (line, end) = take("the `end` line")?;
    if end != "end" {
        return Err(err(line, format!("expected `end` after {count} members")));
    }
    Ok(Ensemble {
        members,
        trace: Vec::new(),
        extraction,
    })
}

fn parse_member(r: &Record) -> std::result::Result<HosHypothesis, String> {
    let lineage = Lineage {
        seed: r.get("seed")?,
        draw: r.get("draw")?,
    };
    let feature_text: String = r.get("feature")?;
    let alpha = r.real("alpha")?;
    let shift = r.real("shift")?;
    if alpha < 0.0 || shift < 0.0 {
        return Err(format!("line {}: alpha and shift must be non-negative", r.line));
    }
    Ok(HosHypothesis {
        feature: parse_descriptor(&feature_text, lineage)?,
        threshold: r.real("theta")?,
        alpha,
        shift,
        kernel: r.get("kernel")?,
        mode: r.get("mode")?,
    })
}

pub fn save_model(ensemble: &Ensemble, path: &Path) -> Result<()> {
    write_text(path, &format_model(ensemble))
}

pub fn load_model(path: &Path) -> Result<Ensemble> {
    parse_model(&read_text(path)?, path)
}
