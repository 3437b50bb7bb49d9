//! Synthetic corpus construction behind a TTS provider contract.
//!
//! The bundled stub emits deterministic band-limited tone sequences keyed
//! by character codepoints: acoustically meaningless, but it exercises
//! every pipeline path with reproducible bytes. Real engines attach
//! through the subprocess protocol.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, Waveform};
use crate::error::{Error, Result};
use crate::subproc::LineProtocolChild;

use super::{Manifest, Provenance, UtteranceRecord, Voice};
use crate::textnorm::NormPolicy;

pub trait TtsProvider: Send + Sync {
    fn synthesize(&self, text: &str, voice: Voice) -> Result<Waveform>;
    /// Recorded in manifest provenance.
    fn identity(&self) -> String;
}

/// Deterministic offline synthesizer: one short tone per character, pitch
/// keyed by the codepoint, voice selecting the base register. Output
/// duration is proportional to the character count.
#[derive(Debug, Clone)]
pub struct StubTts {
    pub sample_rate_hz: u32,
    pub seconds_per_char: f64,
    pub amplitude: f64,
}

impl Default for StubTts {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16000,
            seconds_per_char: 0.08,
            amplitude: 0.3,
        }
    }
}

impl StubTts {
    fn base_freq(voice: Voice) -> f64 {
        match voice {
            Voice::Male => 110.0,
            Voice::Female => 220.0,
        }
    }
}

impl TtsProvider for StubTts {
    fn synthesize(&self, text: &str, voice: Voice) -> Result<Waveform> {
        if text.is_empty() {
            return Err(Error::InvalidConfig("cannot synthesize empty text".into()));
        }
        let rate = self.sample_rate_hz as f64;
        let seg_len = (self.seconds_per_char * rate).round() as usize;
        let ramp = ((0.005 * rate) as usize).min(seg_len / 2);
        let mut samples = Vec::with_capacity(seg_len * text.chars().count());
        for c in text.chars() {
            // 3 octaves above the voice register, within the wav band
            let semitone = (c as u32) % 36;
            let freq = Self::base_freq(voice) * 2f64.powf(semitone as f64 / 12.0);
            for i in 0..seg_len {
                let t = i as f64 / rate;
                let mut s = self.amplitude * (2.0 * std::f64::consts::PI * freq * t).sin();
                // raised-cosine fades against clicks at segment joins
                if i < ramp {
                    s *= 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos();
                } else if i >= seg_len - ramp {
                    let j = seg_len - 1 - i;
                    s *= 0.5 - 0.5 * (std::f64::consts::PI * j as f64 / ramp as f64).cos();
                }
                samples.push(s);
            }
        }
        Waveform::new(samples, self.sample_rate_hz)
    }

    fn identity(&self) -> String {
        format!(
            "stub-tts/{}Hz/{}s-per-char",
            self.sample_rate_hz, self.seconds_per_char
        )
    }
}

#[derive(Serialize)]
struct TtsRequest<'a> {
    id: &'a str,
    text: &'a str,
    voice: &'a str,
}

#[derive(Deserialize)]
struct TtsResponse {
    id: String,
    wav_path: String,
}

/// TTS engine attached over the line protocol: requests
/// `{id, text, voice}`, responses `{id, wav_path}`.
pub struct SubprocessTts {
    command: Vec<String>,
    child: Mutex<Option<LineProtocolChild>>,
    counter: std::sync::atomic::AtomicU64,
}

impl SubprocessTts {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            child: Mutex::new(None),
            counter: std::sync::atomic::AtomicU64::new(0),
        }
    }

    /// Reaps the child process, surfacing a nonzero exit as an error.
    pub fn shutdown(&self) -> Result<()> {
        let mut guard = self.child.lock().expect("tts child lock");
        match guard.take() {
            Some(child) => child.finish(),
            None => Ok(()),
        }
    }
}

impl TtsProvider for SubprocessTts {
    fn synthesize(&self, text: &str, voice: Voice) -> Result<Waveform> {
        let seq = self
            .counter
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let id = format!("tts-{seq:08}");
        let request = serde_json::to_string(&TtsRequest {
            id: &id,
            text,
            voice: voice.as_str(),
        })
        .expect("request serializes");

        let mut guard = self.child.lock().expect("tts child lock");
        if guard.is_none() {
            *guard = Some(LineProtocolChild::spawn(&self.command)?);
        }
        let line = guard.as_mut().expect("spawned above").call(&request)?;
        let response: TtsResponse = serde_json::from_str(&line).map_err(|e| Error::Adapter {
            adapter: self.identity(),
            reason: format!("bad response line {line:?}: {e}"),
        })?;
        if response.id != id {
            return Err(Error::Adapter {
                adapter: self.identity(),
                reason: format!("response id {} for request {id}", response.id),
            });
        }
        crate::audio::read_wav(Path::new(&response.wav_path))
    }

    fn identity(&self) -> String {
        format!("subprocess-tts:{}", self.command.join(" "))
    }
}

/// Synthesizes one record per (text, voice), writes the audio under
/// `out_dir/audio/`, and writes `out_dir/manifest.jsonl` only after every
/// synthesis succeeded, so a provider failure never leaves a partial
/// manifest behind.
pub fn build_synthetic_manifest(
    report_texts: &[String],
    voices: &[Voice],
    provider: &dyn TtsProvider,
    out_dir: &Path,
) -> Result<Manifest> {
    if report_texts.is_empty() {
        return Err(Error::Manifest("no input texts".into()));
    }
    if voices.is_empty() {
        return Err(Error::Manifest("no voices requested".into()));
    }
    for (index, text) in report_texts.iter().enumerate() {
        if text.trim().is_empty() {
            return Err(Error::Provider {
                index,
                reason: "empty text".into(),
            });
        }
    }

    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let mut records = Vec::with_capacity(report_texts.len() * voices.len());
    for (index, text) in report_texts.iter().enumerate() {
        for &voice in voices {
            let waveform = provider
                .synthesize(text, voice)
                .map_err(|e| Error::Provider {
                    index,
                    reason: format!("voice {}: {e}", voice.as_str()),
                })?;
            let id = format!("t{index:05}-{}", voice.as_str());
            let audio_path = format!("audio/{id}.wav");
            write_wav(&waveform, &out_dir.join(&audio_path))?;
            records.push(UtteranceRecord {
                id,
                audio_path,
                reference: text.clone(),
                speaker: None,
                center: None,
                category: None,
                duration_s: waveform.duration_seconds(),
                snr_db: None,
                voice: Some(voice),
                split: None,
            });
        }
    }

    let mut provenance = Provenance::tool();
    provenance.set("stage", "synth");
    provenance.set("provider", provider.identity());
    provenance.set(
        "voices",
        voices.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
    );
    provenance.set("n_texts", report_texts.len());

    let manifest = Manifest::new(records, NormPolicy::default(), provenance)?;
    manifest.write_jsonl(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
