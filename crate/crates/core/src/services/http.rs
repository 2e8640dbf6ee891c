//! JSON-over-HTTP clients.
//!
//! Wire contract:
//!
//! - `POST {world}/generate` with a [`SceneSpec`] answers with binary PLY bytes.
//! - `POST {detect}/detect` with `{frame_id, pose, intrinsics, depth, rgb}`
//!   answers `{boxes: [...]}`. Depth is `{width, height, data}` in row-major
//!   order with `null` for pixels without a return.
//! - `POST {llm}/quality` with `{frames}` answers `{accepted, reason}`.
//! - `POST {llm}/prompts` with `{target, context}` answers `[{style, text}]`.
//!
//! Requests time out per call and are retried up to `attempts` times with
//! exponential backoff on transport errors, 429 and 5xx.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    stable_hash, DetectionRequest, DetectionResponse, Detector, DetectorFactory, FrameMeta, GeneratedWorld,
    LanguageAnnotator, PromptVariant, QualityVerdict, SceneSpec, ServiceError, WorldGenerator,
};
use crate::annotate::Box3D;
use crate::geometry::Vec3;
use crate::nav::NavTarget;
use crate::scene::{parse_ply, SplatScene};

const BODY_LIMIT: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Clone)]
struct Client {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl Client {
    fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{path}", self.config.base_url.trim_end_matches('/'))
    }

    fn post_bytes<B: Serialize + ?Sized>(&self, path: &str, body: &B) -> Result<Vec<u8>, ServiceError> {
        let endpoint = self.endpoint(path);
        let payload = serde_json::to_vec(body).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let attempts = self.config.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff * 2u32.pow(attempt - 1);
                log::warn!("{endpoint}: retrying in {delay:?} after {}", last.as_ref().expect("failed before"));
                std::thread::sleep(delay);
            }
            let sent = self.agent.post(&endpoint).header("content-type", "application/json").send(&payload[..]);
            let mut resp = match sent {
                Ok(r) => r,
                Err(e) => {
                    last = Some(ServiceError::Transport { endpoint: endpoint.clone(), message: e.to_string() });
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let bytes = match resp.body_mut().with_config().limit(BODY_LIMIT).read_to_vec() {
                Ok(b) => b,
                Err(e) => {
                    last = Some(ServiceError::Transport { endpoint: endpoint.clone(), message: e.to_string() });
                    continue;
                }
            };
            if (200..300).contains(&status) {
                return Ok(bytes);
            }
            let message = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]).into_owned();
            let err = ServiceError::Status { endpoint: endpoint.clone(), status, message };
            if status == 429 || status >= 500 {
                last = Some(err);
            } else {
                return Err(err);
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn post_json<B: Serialize + ?Sized, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ServiceError> {
        let bytes = self.post_bytes(path, body)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| ServiceError::Decode { endpoint: self.endpoint(path), message: e.to_string() })
    }
}

pub struct HttpWorldGenerator {
    client: Client,
}

impl HttpWorldGenerator {
    pub fn new(config: HttpConfig) -> Self {
        Self { client: Client::new(config) }
    }
}

impl WorldGenerator for HttpWorldGenerator {
    fn generate(&self, spec: &SceneSpec) -> Result<GeneratedWorld, ServiceError> {
        let bytes = self.client.post_bytes("generate", spec)?;
        let primitives = parse_ply(&bytes)
            .map_err(|e| ServiceError::Decode { endpoint: self.client.endpoint("generate"), message: e.to_string() })?;
        Ok(GeneratedWorld {
            seed: stable_hash(spec),
            scene: SplatScene::new(primitives, Vec3::zeros()),
            objects: Vec::new(),
        })
    }
}

pub struct HttpDetectorFactory {
    client: Client,
}

impl HttpDetectorFactory {
    pub fn new(config: HttpConfig) -> Self {
        Self { client: Client::new(config) }
    }
}

impl DetectorFactory for HttpDetectorFactory {
    fn session(&self, _world: &GeneratedWorld) -> Result<Box<dyn Detector>, ServiceError> {
        Ok(Box::new(HttpDetector { client: self.client.clone() }))
    }
}

pub struct HttpDetector {
    client: Client,
}

#[derive(Deserialize)]
struct DetectReply {
    boxes: Vec<Box3D>,
}

impl Detector for HttpDetector {
    fn detect(&self, req: &DetectionRequest) -> Result<DetectionResponse, ServiceError> {
        let depth = req.depth.as_ref().map(|d| {
            let data: Vec<Option<f64>> = d.data.iter().map(|v| v.is_finite().then_some(*v)).collect();
            json!({ "width": d.width, "height": d.height, "data": data })
        });
        let body = json!({
            "frame_id": req.frame_id,
            "pose": req.pose,
            "intrinsics": req.intrinsics,
            "depth": depth,
            "rgb": req.rgb,
        });
        let reply: DetectReply = self.client.post_json("detect", &body)?;
        let boxes = reply.boxes.into_iter().map(|b| Box3D { source_frame: Some(req.frame_id), ..b }).collect();
        Ok(DetectionResponse { frame_id: req.frame_id, boxes })
    }
}

pub struct HttpLanguage {
    client: Client,
}

impl HttpLanguage {
    pub fn new(config: HttpConfig) -> Self {
        Self { client: Client::new(config) }
    }
}

impl LanguageAnnotator for HttpLanguage {
    fn assess_quality(&self, frames: &[FrameMeta]) -> Result<QualityVerdict, ServiceError> {
        self.client.post_json("quality", &json!({ "frames": frames }))
    }

    fn generate_prompts(&self, target: &NavTarget, context: &[Box3D]) -> Result<Vec<PromptVariant>, ServiceError> {
        self.client.post_json("prompts", &json!({ "target": target, "context": context }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraPose;
    use crate::scene::{write_ply, DepthImage, GaussianPrimitive, Intrinsics};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    type Requests = Vec<(String, Vec<u8>)>;

    /// Serves one scripted response per connection and returns the request bodies.
    fn serve(replies: Vec<(u16, Vec<u8>)>) -> (String, JoinHandle<Requests>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut req_body = vec![0; len];
                reader.read_exact(&mut req_body).unwrap();
                seen.push((request_line.trim().to_string(), req_body));
                let mut stream = reader.into_inner();
                write!(stream, "HTTP/1.1 {status} X\r\ncontent-length: {}\r\nconnection: close\r\n\r\n", body.len())
                    .unwrap();
                stream.write_all(&body).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn fast(url: &str) -> HttpConfig {
        HttpConfig { backoff: Duration::from_millis(1), timeout: Duration::from_secs(5), ..HttpConfig::new(url) }
    }

    fn frames() -> Vec<FrameMeta> {
        vec![FrameMeta { index: 0, t: 0.0, infinite_fraction: 0.0, min_depth: Some(1.0) }]
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let ok = br#"{"accepted":true,"reason":"ok"}"#.to_vec();
        let (url, h) = serve(vec![(503, b"busy".to_vec()), (500, Vec::new()), (200, ok)]);
        let v = HttpLanguage::new(fast(&url)).assess_quality(&frames()).unwrap();
        assert!(v.accepted);
        let seen = h.join().unwrap();
        assert_eq!(seen.len(), 3);
        assert_eq!(seen[0].0, "POST /quality HTTP/1.1");
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let (url, h) = serve(vec![(503, b"a".to_vec()), (503, b"b".to_vec()), (503, b"down".to_vec())]);
        let err = HttpLanguage::new(fast(&url)).assess_quality(&frames()).unwrap_err();
        assert_eq!(
            err,
            ServiceError::Status { endpoint: format!("{url}/quality"), status: 503, message: "down".into() }
        );
        assert_eq!(h.join().unwrap().len(), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, h) = serve(vec![(400, b"bad".to_vec())]);
        let err = HttpLanguage::new(fast(&url)).assess_quality(&frames()).unwrap_err();
        assert!(matches!(err, ServiceError::Status { status: 400, .. }));
        assert_eq!(h.join().unwrap().len(), 1);
    }

    #[test]
    fn connection_refused_names_endpoint() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let err = HttpLanguage::new(fast(&url)).assess_quality(&frames()).unwrap_err();
        match err {
            ServiceError::Transport { endpoint, .. } => assert_eq!(endpoint, format!("{url}/quality")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detector_round_trip() {
        let reply = json!({ "boxes": [Box3D::new("lamp", Vec3::new(1.0, 2.0, 0.0), Vec3::repeat(0.2))] });
        let (url, h) = serve(vec![(200, serde_json::to_vec(&reply).unwrap())]);
        let world = GeneratedWorld { seed: 0, scene: SplatScene::new(Vec::new(), Vec3::zeros()), objects: Vec::new() };
        let det = HttpDetectorFactory::new(fast(&url)).session(&world).unwrap();
        let req = DetectionRequest {
            frame_id: 17,
            pose: CameraPose::new(Vec3::zeros(), 0.0, 0.0),
            intrinsics: Intrinsics::from_hfov(2, 1, 1.0),
            depth: Some(DepthImage { width: 2, height: 1, data: vec![1.5, f64::INFINITY] }),
            rgb: None,
        };
        let resp = det.detect(&req).unwrap();
        assert_eq!(resp.boxes[0].source_frame, Some(17));
        let sent: serde_json::Value = serde_json::from_slice(&h.join().unwrap()[0].1).unwrap();
        assert_eq!(sent["depth"]["data"], json!([1.5, null]));
        assert_eq!(sent["frame_id"], 17);
    }

    #[test]
    fn world_generator_ingests_ply() {
        let prims = vec![GaussianPrimitive::sphere(Vec3::new(1.0, 2.0, 3.0), 0.1, 0.9)];
        let mut ply = Vec::new();
        write_ply(&prims, &mut ply).unwrap();
        let (url, _h) = serve(vec![(200, ply)]);
        let spec =
            SceneSpec { category: "c".into(), subcategory: "s".into(), description: "d".into(), image_ref: None };
        let w = HttpWorldGenerator::new(fast(&url)).generate(&spec).unwrap();
        assert_eq!(w.scene.primitives.len(), 1);
        assert!((w.scene.primitives[0].position - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-6);
    }
}
