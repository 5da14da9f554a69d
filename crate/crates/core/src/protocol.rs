//! Score wire protocol.
//!
//! Every frame starts with a fixed 24-byte little-endian header:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SCR1"
//!      4     1  msg_type  0x01 request | 0x81 response | 0xFF error
//!      5     1  flags     bit0 = complex payload
//!      6     2  reserved  (zero)
//!      8     4  height    u32
//!     12     4  width     u32
//!     16     8  sigma     f64
//! ```
//!
//! Request and response payloads hold `height·width` f32 values row-major,
//! interleaved `(re, im)` when the complex flag is set. An error frame sets
//! `height = 1`, `width = byte length`, and carries that many bytes of UTF-8.

use std::fmt;
use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};

pub const MAGIC: [u8; 4] = *b"SCR1";
pub const HEADER_LEN: usize = 24;
pub const FLAG_COMPLEX: u8 = 0x01;

/// Frames larger than this many payload bytes are rejected.
const MAX_PAYLOAD_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageType {
    Request = 0x01,
    Response = 0x81,
    Error = 0xFF,
}

impl MessageType {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(Self::Request),
            0x81 => Some(Self::Response),
            0xFF => Some(Self::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Request(ScoreFrame),
    Response(ScoreFrame),
    Error(String),
}

/// Payload-carrying frame body shared by requests and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFrame {
    pub complex: bool,
    pub height: u32,
    pub width: u32,
    pub sigma: f64,
    pub values: Vec<f32>,
}

impl ScoreFrame {
    pub fn expected_len(&self) -> usize {
        self.height as usize * self.width as usize * if self.complex { 2 } else { 1 }
    }
}

fn header(msg: MessageType, flags: u8, height: u32, width: u32, sigma: f64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4] = msg as u8;
    h[5] = flags;
    h[8..12].copy_from_slice(&height.to_le_bytes());
    h[12..16].copy_from_slice(&width.to_le_bytes());
    h[16..24].copy_from_slice(&sigma.to_le_bytes());
    h
}

pub fn encode(frame: &Frame) -> Result<Vec<u8>> {
    let (msg, body) = match frame {
        Frame::Request(b) => (MessageType::Request, b),
        Frame::Response(b) => (MessageType::Response, b),
        Frame::Error(message) => {
            let bytes = message.as_bytes();
            let mut out = header(MessageType::Error, 0, 1, bytes.len() as u32, 0.0).to_vec();
            out.extend_from_slice(bytes);
            return Ok(out);
        }
    };
    if body.values.len() != body.expected_len() {
        return Err(Error::Transport(format!(
            "payload holds {} values, header implies {}",
            body.values.len(),
            body.expected_len()
        )));
    }
    let flags = if body.complex { FLAG_COMPLEX } else { 0 };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * body.values.len());
    out.extend_from_slice(&header(msg, flags, body.height, body.width, body.sigma));
    for v in &body.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    let bytes = encode(frame)?;
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::Transport(format!("write failed: {e}")))
}

/// Outcome of reading one frame: a decoded frame, or a header that was read
/// completely but is malformed (the stream is positioned after its payload
/// whenever the payload length could be determined).
#[derive(Debug)]
pub enum ReadOutcome {
    Frame(Frame),
    Malformed(String),
    Eof,
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<ReadOutcome> {
    let mut h = [0u8; HEADER_LEN];
    let io_err = |e: io::Error| Error::Transport(format!("read failed: {e}"));
    if !read_exact_or_eof(r, &mut h).map_err(io_err)? {
        return Ok(ReadOutcome::Eof);
    }
    if h[0..4] != MAGIC {
        return Ok(ReadOutcome::Malformed(format!(
            "bad magic {:02x?}",
            &h[0..4]
        )));
    }
    let height = u32::from_le_bytes(h[8..12].try_into().unwrap());
    let width = u32::from_le_bytes(h[12..16].try_into().unwrap());
    let sigma = f64::from_le_bytes(h[16..24].try_into().unwrap());
    let complex = h[5] & FLAG_COMPLEX != 0;
    let Some(msg) = MessageType::from_byte(h[4]) else {
        return Ok(ReadOutcome::Malformed(format!("unknown message type 0x{:02x}", h[4])));
    };
    let payload_bytes = match msg {
        MessageType::Error => height as u64 * width as u64,
        _ => height as u64 * width as u64 * if complex { 8 } else { 4 },
    };
    if payload_bytes > MAX_PAYLOAD_BYTES {
        return Ok(ReadOutcome::Malformed(format!("payload of {payload_bytes} bytes too large")));
    }
    let mut payload = vec![0u8; payload_bytes as usize];
    if !payload.is_empty() && !read_exact_or_eof(r, &mut payload).map_err(io_err)? {
        return Err(Error::Transport("stream ended inside a frame".into()));
    }
    let frame = match msg {
        MessageType::Error => Frame::Error(String::from_utf8_lossy(&payload).into_owned()),
        _ => {
            let values = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let body = ScoreFrame {
                complex,
                height,
                width,
                sigma,
                values,
            };
            if msg == MessageType::Request {
                Frame::Request(body)
            } else {
                Frame::Response(body)
            }
        }
    };
    Ok(ReadOutcome::Frame(frame))
}

/// Answers requests on one connection until the peer closes it. Malformed
/// frames and handler failures produce error frames; the connection stays
/// open.
pub fn serve_connection<S, F>(stream: &mut S, mut handler: F) -> Result<()>
where
    S: Read + Write,
    F: FnMut(&ScoreFrame) -> std::result::Result<Vec<f32>, String>,
{
    loop {
        let reply = match read_frame(stream)? {
            ReadOutcome::Eof => return Ok(()),
            ReadOutcome::Malformed(msg) => Frame::Error(msg),
            ReadOutcome::Frame(Frame::Request(req)) => {
                if req.values.len() != req.expected_len() {
                    Frame::Error("payload length mismatch".into())
                } else {
                    match handler(&req) {
                        Ok(values) if values.len() == req.expected_len() => {
                            Frame::Response(ScoreFrame { values, ..req })
                        }
                        Ok(_) => Frame::Error("handler returned wrong payload length".into()),
                        Err(msg) => Frame::Error(msg),
                    }
                }
            }
            ReadOutcome::Frame(_) => Frame::Error("expected a request frame".into()),
        };
        write_frame(stream, &reply)?;
    }
}

/// Where an external score endpoint lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    /// `host:port` of a listening server.
    Tcp(String),
    /// Shell command whose standard input/output carry the frames.
    Command(String),
}

impl Endpoint {
    /// `host:port` (no whitespace, numeric port) is a TCP address; anything
    /// else is a command line.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty score endpoint".into()));
        }
        let is_addr = !s.contains(char::is_whitespace)
            && s.rsplit_once(':').is_some_and(|(host, port)| {
                !host.is_empty() && !host.contains('/') && port.parse::<u16>().is_ok()
            });
        Ok(if is_addr {
            Self::Tcp(s.to_string())
        } else {
            Self::Command(s.to_string())
        })
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tcp(a) | Self::Command(a) => f.write_str(a),
        }
    }
}

enum Connection {
    Tcp(TcpStream),
    Child {
        child: Child,
        stdin: ChildStdin,
        stdout: ChildStdout,
    },
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Self::Child { child, .. } = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Client side of one score connection. Requests are strictly sequential.
pub struct ScoreClient {
    endpoint: Endpoint,
    conn: Connection,
}

impl fmt::Debug for ScoreClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreClient").field("endpoint", &self.endpoint).finish()
    }
}

impl ScoreClient {
    pub fn connect(endpoint: &Endpoint) -> Result<Self> {
        let conn = match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)
                    .map_err(|e| Error::Transport(format!("connect to {addr}: {e}")))?;
                let _ = stream.set_nodelay(true);
                Connection::Tcp(stream)
            }
            Endpoint::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Transport(format!("spawn `{cmd}`: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Connection::Child {
                    child,
                    stdin,
                    stdout,
                }
            }
        };
        Ok(Self {
            endpoint: endpoint.clone(),
            conn,
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Sends one request and waits for its response, checking that the
    /// response echoes the request's shape.
    pub fn request(&mut self, req: ScoreFrame) -> Result<ScoreFrame> {
        let frame = Frame::Request(req.clone());
        let outcome = match &mut self.conn {
            Connection::Tcp(s) => {
                write_frame(s, &frame)?;
                read_frame(s)?
            }
            Connection::Child { stdin, stdout, .. } => {
                write_frame(stdin, &frame)?;
                read_frame(stdout)?
            }
        };
        match outcome {
            ReadOutcome::Frame(Frame::Response(resp)) => {
                if resp.height != req.height || resp.width != req.width || resp.complex != req.complex
                {
                    return Err(Error::Transport(format!(
                        "response shape {}x{} (complex {}) does not echo request {}x{} (complex {})",
                        resp.height, resp.width, resp.complex, req.height, req.width, req.complex
                    )));
                }
                Ok(resp)
            }
            ReadOutcome::Frame(Frame::Error(msg)) => {
                Err(Error::Transport(format!("endpoint error: {msg}")))
            }
            ReadOutcome::Frame(Frame::Request(_)) => {
                Err(Error::Transport("endpoint sent a request frame".into()))
            }
            ReadOutcome::Malformed(msg) => Err(Error::Transport(format!("malformed response: {msg}"))),
            ReadOutcome::Eof => Err(Error::Transport("endpoint closed the connection".into())),
        }
    }

    pub fn score_real(&mut self, x: &RealImage, sigma: f64) -> Result<RealImage> {
        let (h, w) = x.dims();
        let resp = self.request(ScoreFrame {
            complex: false,
            height: h as u32,
            width: w as u32,
            sigma,
            values: x.as_slice().iter().map(|&v| v as f32).collect(),
        })?;
        let data: Vec<f64> = resp.values.iter().map(|&v| v as f64).collect();
        RealImage::new(h, w, data).map_err(|_| Error::Transport("non-finite score values".into()))
    }

    pub fn score_complex(&mut self, o: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
        let (h, w) = o.dims();
        let resp = self.request(ScoreFrame {
            complex: true,
            height: h as u32,
            width: w as u32,
            sigma,
            values: o
                .as_slice()
                .iter()
                .flat_map(|z| [z.re as f32, z.im as f32])
                .collect(),
        })?;
        let data: Vec<Complex64> = resp
            .values
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
            .collect();
        ComplexImage::new(h, w, data)
            .map_err(|_| Error::Transport("non-finite score values".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn golden_request_bytes() {
        let frame = Frame::Request(ScoreFrame {
            complex: false,
            height: 1,
            width: 2,
            sigma: 0.5,
            values: vec![1.0, -2.0],
        });
        let bytes = encode(&frame).unwrap();
        let expected: Vec<u8> = vec![
            b'S', b'C', b'R', b'1', 0x01, 0x00, 0x00, 0x00, // magic, type, flags, reserved
            1, 0, 0, 0, 2, 0, 0, 0, // height, width
            0, 0, 0, 0, 0, 0, 0xE0, 0x3F, // 0.5f64
            0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0, // 1.0f32, -2.0f32
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn golden_complex_response_and_error() {
        let frame = Frame::Response(ScoreFrame {
            complex: true,
            height: 1,
            width: 1,
            sigma: 1.0,
            values: vec![0.5, 0.25],
        });
        let bytes = encode(&frame).unwrap();
        assert_eq!(&bytes[4..6], &[0x81, 0x01]);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[24..], &[0, 0, 0, 0x3F, 0, 0, 0x80, 0x3E]);

        let err = encode(&Frame::Error("no".into())).unwrap();
        assert_eq!(err.len(), HEADER_LEN + 2);
        assert_eq!(err[4], 0xFF);
        assert_eq!(&err[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&err[24..], b"no");
    }

    #[test]
    fn decode_roundtrip() {
        let frames = vec![
            Frame::Request(ScoreFrame {
                complex: true,
                height: 2,
                width: 3,
                sigma: 0.125,
                values: (0..12).map(|i| i as f32 * 0.5).collect(),
            }),
            Frame::Error("bad things".into()),
        ];
        let mut buf = Vec::new();
        for f in &frames {
            write_frame(&mut buf, f).unwrap();
        }
        let mut cur = Cursor::new(buf);
        for f in &frames {
            match read_frame(&mut cur).unwrap() {
                ReadOutcome::Frame(got) => assert_eq!(&got, f),
                other => panic!("{other:?}"),
            }
        }
        assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Eof));
    }

    #[test]
    fn inconsistent_payload_rejected_on_encode() {
        let frame = Frame::Request(ScoreFrame {
            complex: true,
            height: 2,
            width: 2,
            sigma: 0.1,
            values: vec![0.0; 4],
        });
        assert!(encode(&frame).is_err());
    }

    #[test]
    fn wrong_magic_is_malformed() {
        let mut bytes = encode(&Frame::Error(String::new())).unwrap();
        bytes[0] = b'X';
        let out = read_frame(&mut Cursor::new(bytes)).unwrap();
        assert!(matches!(out, ReadOutcome::Malformed(_)));
    }

    #[test]
    fn truncated_frame_is_transport_error() {
        let bytes = encode(&Frame::Request(ScoreFrame {
            complex: false,
            height: 2,
            width: 2,
            sigma: 0.1,
            values: vec![0.0; 4],
        }))
        .unwrap();
        let cut = bytes[..HEADER_LEN + 5].to_vec();
        assert!(matches!(
            read_frame(&mut Cursor::new(cut)),
            Err(Error::Transport(_))
        ));
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(Endpoint::parse("localhost:9000").unwrap(), Endpoint::Tcp("localhost:9000".into()));
        assert_eq!(Endpoint::parse("127.0.0.1:1").unwrap(), Endpoint::Tcp("127.0.0.1:1".into()));
        assert_eq!(
            Endpoint::parse("python serve.py --stdio").unwrap(),
            Endpoint::Command("python serve.py --stdio".into())
        );
        assert_eq!(Endpoint::parse("./server").unwrap(), Endpoint::Command("./server".into()));
        assert!(Endpoint::parse("  ").is_err());
    }
}
