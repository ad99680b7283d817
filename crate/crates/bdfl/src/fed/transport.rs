//! Pluggable message transports: in-process channels and length-prefixed
//! JSON frames over TCP.

use super::message::{Message, PartyRole};
use crate::error::ProtocolError;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{Receiver, Sender};

/// Upper bound on a single frame; anything larger is rejected before
/// allocation.
pub const MAX_FRAME_BYTES: u64 = 256 * 1024 * 1024;

/// Point-to-point message plumbing for one party. `recv` names the peer so
/// arrival order between different peers can never race.
pub trait Transport: Send {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError>;
    fn recv(&mut self, from: PartyRole) -> Result<Message, ProtocolError>;
}

/// Encodes a message as a 4-byte big-endian length followed by its JSON.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    let body = serde_json::to_vec(msg)
        .map_err(|e| ProtocolError::Transport(format!("encode: {e}")))?;
    if body.len() as u64 > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLarge(body.len() as u64));
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Decodes one frame from the front of `buf`.
///
/// Returns `Ok(None)` when the buffer does not yet hold a complete frame,
/// and `Ok(Some((message, consumed)))` once it does. Oversized or
/// syntactically invalid frames are errors. This is the untrusted-input
/// entry point exercised by the fuzz targets.
pub fn decode_frame(buf: &[u8]) -> Result<Option<(Message, usize)>, ProtocolError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as u64;
    if len > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    let total = 4 + len as usize;
    if buf.len() < total {
        return Ok(None);
    }
    let msg: Message = serde_json::from_slice(&buf[4..total])
        .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    Ok(Some((msg, total)))
}

/// In-process transport backed by one mpsc channel per directed edge.
pub struct ChannelTransport {
    outgoing: HashMap<PartyRole, Sender<Message>>,
    incoming: HashMap<PartyRole, Receiver<Message>>,
}

impl ChannelTransport {
    pub fn new(
        outgoing: HashMap<PartyRole, Sender<Message>>,
        incoming: HashMap<PartyRole, Receiver<Message>>,
    ) -> Self {
        ChannelTransport { outgoing, incoming }
    }
}

impl Transport for ChannelTransport {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let tx = self
            .outgoing
            .get(&msg.to)
            .ok_or_else(|| ProtocolError::Transport(format!("no channel to {}", msg.to.name())))?;
        tx.send(msg.clone())
            .map_err(|_| ProtocolError::Transport(format!("peer {} hung up", msg.to.name())))
    }

    fn recv(&mut self, from: PartyRole) -> Result<Message, ProtocolError> {
        let rx = self
            .incoming
            .get(&from)
            .ok_or_else(|| ProtocolError::Transport(format!("no channel from {}", from.name())))?;
        rx.recv()
            .map_err(|_| ProtocolError::Transport(format!("peer {} hung up", from.name())))
    }
}

/// TCP transport: one stream per peer, frames as in [`encode_frame`].
pub struct TcpTransport {
    peers: HashMap<PartyRole, TcpStream>,
    buffers: HashMap<PartyRole, Vec<u8>>,
}

impl TcpTransport {
    pub fn new(peers: HashMap<PartyRole, TcpStream>) -> Self {
        let buffers = peers.keys().map(|&r| (r, Vec::new())).collect();
        TcpTransport { peers, buffers }
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let frame = encode_frame(msg)?;
        let stream = self
            .peers
            .get_mut(&msg.to)
            .ok_or_else(|| ProtocolError::Transport(format!("no stream to {}", msg.to.name())))?;
        stream
            .write_all(&frame)
            .map_err(|e| ProtocolError::Transport(format!("send to {}: {e}", msg.to.name())))
    }

    fn recv(&mut self, from: PartyRole) -> Result<Message, ProtocolError> {
        let stream = self
            .peers
            .get_mut(&from)
            .ok_or_else(|| ProtocolError::Transport(format!("no stream from {}", from.name())))?;
        let buf = self.buffers.get_mut(&from).expect("buffer exists for every peer");
        let mut chunk = [0u8; 64 * 1024];
        loop {
            if let Some((msg, consumed)) = decode_frame(buf)? {
                buf.drain(..consumed);
                return Ok(msg);
            }
            let n = stream
                .read(&mut chunk)
                .map_err(|e| ProtocolError::Transport(format!("recv from {}: {e}", from.name())))?;
            if n == 0 {
                return Err(ProtocolError::Transport(format!("peer {} closed", from.name())));
            }
            buf.extend_from_slice(&chunk[..n]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::message::Payload;
    use super::*;

    fn msg() -> Message {
        Message {
            round: 1,
            from: PartyRole::HostA,
            to: PartyRole::GuestB,
            payload: Payload::Converged { flag: true },
        }
    }

    #[test]
    fn frame_round_trip() {
        let m = msg();
        let frame = encode_frame(&m).unwrap();
        let (back, consumed) = decode_frame(&frame).unwrap().unwrap();
        assert_eq!(consumed, frame.len());
        assert_eq!(back, m);
    }

    #[test]
    fn partial_frames_wait_for_more_bytes() {
        let frame = encode_frame(&msg()).unwrap();
        for cut in [0, 1, 3, 4, frame.len() - 1] {
            assert!(decode_frame(&frame[..cut]).unwrap().is_none(), "cut {cut}");
        }
        // trailing bytes after a full frame are left alone
        let mut two = frame.clone();
        two.extend_from_slice(&frame);
        let (_, consumed) = decode_frame(&two).unwrap().unwrap();
        assert_eq!(consumed, frame.len());
    }

    #[test]
    fn oversized_and_garbage_frames_are_rejected() {
        let mut huge = Vec::new();
        huge.extend_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(decode_frame(&huge), Err(ProtocolError::FrameTooLarge(_))));

        let mut garbage = Vec::new();
        garbage.extend_from_slice(&5u32.to_be_bytes());
        garbage.extend_from_slice(b"not j");
        assert!(matches!(decode_frame(&garbage), Err(ProtocolError::MalformedFrame(_))));
    }

    #[test]
    fn tcp_transport_delivers_frames() {
        use std::net::TcpListener;
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut t =
                TcpTransport::new(HashMap::from([(PartyRole::HostA, stream)]));
            t.recv(PartyRole::HostA).unwrap()
        });
        let stream = TcpStream::connect(addr).unwrap();
        let mut t = TcpTransport::new(HashMap::from([(PartyRole::GuestB, stream)]));
        t.send(&msg()).unwrap();
        assert_eq!(handle.join().unwrap(), msg());
    }
}
