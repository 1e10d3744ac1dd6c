//! Two-party exchange over a byte stream.
//!
//! Every frame is a 4-byte big-endian length followed by a message:
//! `MAKE`, version `0x01`, a type byte and the payload. The responder offers
//! parameters, the initiator sends its token, the responder answers with its
//! own, then both sides exchange SHA-256 digests of their keys. Only the
//! additive component of each party's power is ever written to the wire.

use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::Rng;

use crate::codec::{Reader, MAGIC, VERSION};
use crate::error::{Error, Result};
use crate::matrix::MatrixZp;
use crate::modmath::Modulus;
use crate::paramgen::{gen_private_exponent, PublicParams};
use crate::protocol::{decode_token_message, encode_token_message, ExchangeState, MSG_TOKEN};

pub const MSG_PARAMS_OFFER: u8 = 0x00;
pub const MSG_CONFIRM: u8 = 0x02;

/// Largest accepted frame body.
pub const MAX_FRAME: usize = 1 << 24;

pub const IO_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    ParamsOffer(PublicParams),
    Token(MatrixZp),
    Confirm([u8; 32]),
}

impl WireMessage {
    pub fn msg_type(&self) -> u8 {
        match self {
            WireMessage::ParamsOffer(_) => MSG_PARAMS_OFFER,
            WireMessage::Token(_) => MSG_TOKEN,
            WireMessage::Confirm(_) => MSG_CONFIRM,
        }
    }

    pub fn name(&self) -> &'static str {
        type_name(self.msg_type())
    }

    /// Frame body, without the length prefix.
    pub fn encode(&self) -> Vec<u8> {
        match self {
            WireMessage::Token(a) => encode_token_message(a),
            WireMessage::ParamsOffer(p) => {
                let mut buf = header(MSG_PARAMS_OFFER);
                buf.extend_from_slice(&p.to_bytes());
                buf
            }
            WireMessage::Confirm(d) => {
                let mut buf = header(MSG_CONFIRM);
                buf.extend_from_slice(d);
                buf
            }
        }
    }

    /// Tokens can only be parsed once the modulus is known.
    pub fn decode(body: &[u8], modulus: Option<&Modulus>) -> Result<Self> {
        let mut r = Reader::new(body);
        r.header()?;
        let ty = r.u8()?;
        match ty {
            MSG_PARAMS_OFFER => {
                let p = PublicParams::read_from(&mut r)?;
                r.finish()?;
                Ok(WireMessage::ParamsOffer(p))
            }
            MSG_TOKEN => match modulus {
                Some(md) => decode_token_message(body, md).map(WireMessage::Token),
                None => Err(Error::OutOfOrder { expected: "params-offer", got: "token".into() }),
            },
            MSG_CONFIRM => {
                let d: [u8; 32] = r.bytes(32)?.try_into().expect("32 bytes");
                r.finish()?;
                Ok(WireMessage::Confirm(d))
            }
            other => Err(Error::Decode(format!("unknown message type 0x{other:02x}"))),
        }
    }
}

fn header(ty: u8) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(ty);
    buf
}

fn type_name(ty: u8) -> &'static str {
    match ty {
        MSG_PARAMS_OFFER => "params-offer",
        MSG_TOKEN => "token",
        MSG_CONFIRM => "confirm",
        _ => "unknown",
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, body: &[u8]) -> Result<()> {
    if body.len() > MAX_FRAME {
        return Err(Error::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(body)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body)?;
    Ok(body)
}

pub fn send<W: Write + ?Sized>(w: &mut W, msg: &WireMessage) -> Result<()> {
    write_frame(w, &msg.encode())
}

pub fn recv<R: Read + ?Sized>(r: &mut R, modulus: Option<&Modulus>) -> Result<WireMessage> {
    WireMessage::decode(&read_frame(r)?, modulus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Expect {
    Offer,
    Token,
    Confirm,
    Done,
}

impl Expect {
    fn name(self) -> &'static str {
        match self {
            Expect::Offer => "params-offer",
            Expect::Token => "token",
            Expect::Confirm => "confirm",
            Expect::Done => "end of session",
        }
    }

    fn reject(self, msg: &WireMessage) -> Error {
        Error::OutOfOrder { expected: self.name(), got: msg.name().to_string() }
    }
}

/// Result of a completed session in which both digests matched.
#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub state: ExchangeState,
    pub digest: [u8; 32],
}

impl SessionOutcome {
    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }
}

fn conclude(state: ExchangeState, peer: [u8; 32]) -> Result<SessionOutcome> {
    let digest = *state.shared_key().expect("finalized before confirmation").digest();
    if digest != peer {
        return Err(Error::KeyMismatch);
    }
    Ok(SessionOutcome { state, digest })
}

/// The party that holds the parameters and answers the connection.
#[derive(Debug)]
pub struct Responder {
    state: ExchangeState,
    expect: Expect,
    peer_digest: Option<[u8; 32]>,
}

impl Responder {
    /// Picks a secret and returns the offer to send first.
    pub fn new<R: Rng + ?Sized>(params: &PublicParams, rng: &mut R) -> Result<(Self, WireMessage)> {
        let secret = gen_private_exponent(params.prime().q(), rng)?;
        let state = ExchangeState::initiate(params, secret)?;
        let r = Responder { state, expect: Expect::Token, peer_digest: None };
        Ok((r, WireMessage::ParamsOffer(params.clone())))
    }

    pub fn modulus(&self) -> &Modulus {
        self.state.params().prime().modulus()
    }

    pub fn is_done(&self) -> bool {
        self.expect == Expect::Done
    }

    /// Advances on one received message, returning the reply if any.
    pub fn handle(&mut self, msg: WireMessage) -> Result<Option<WireMessage>> {
        match (self.expect, msg) {
            (Expect::Token, WireMessage::Token(b)) => {
                self.state.finalize(&b)?;
                self.expect = Expect::Confirm;
                Ok(Some(WireMessage::Token(self.state.sent_token().clone())))
            }
            (Expect::Confirm, WireMessage::Confirm(d)) => {
                self.peer_digest = Some(d);
                self.expect = Expect::Done;
                let own = *self.state.shared_key().expect("finalized").digest();
                Ok(Some(WireMessage::Confirm(own)))
            }
            (e, msg) => Err(e.reject(&msg)),
        }
    }

    pub fn finish(self) -> Result<SessionOutcome> {
        match (self.expect, self.peer_digest) {
            (Expect::Done, Some(peer)) => conclude(self.state, peer),
            (e, _) => Err(Error::Protocol(format!("session ended while waiting for {}", e.name()))),
        }
    }
}

/// The connecting party, which learns the parameters from the offer.
#[derive(Debug)]
pub struct Initiator {
    state: Option<ExchangeState>,
    expect: Expect,
    peer_digest: Option<[u8; 32]>,
}

impl Default for Initiator {
    fn default() -> Self {
        Self::new()
    }
}

impl Initiator {
    pub fn new() -> Self {
        Initiator { state: None, expect: Expect::Offer, peer_digest: None }
    }

    pub fn modulus(&self) -> Option<&Modulus> {
        self.state.as_ref().map(|s| s.params().prime().modulus())
    }

    pub fn is_done(&self) -> bool {
        self.expect == Expect::Done
    }

    pub fn handle<R: Rng + ?Sized>(&mut self, msg: WireMessage, rng: &mut R) -> Result<Option<WireMessage>> {
        match (self.expect, msg) {
            (Expect::Offer, WireMessage::ParamsOffer(params)) => {
                let secret = gen_private_exponent(params.prime().q(), rng)?;
                let state = ExchangeState::initiate(&params, secret)?;
                let token = state.sent_token().clone();
                self.state = Some(state);
                self.expect = Expect::Token;
                Ok(Some(WireMessage::Token(token)))
            }
            (Expect::Token, WireMessage::Token(b)) => {
                let state = self.state.as_mut().expect("set on offer");
                let key = state.finalize(&b)?;
                self.expect = Expect::Confirm;
                Ok(Some(WireMessage::Confirm(*key.digest())))
            }
            (Expect::Confirm, WireMessage::Confirm(d)) => {
                self.peer_digest = Some(d);
                self.expect = Expect::Done;
                Ok(None)
            }
            (e, msg) => Err(e.reject(&msg)),
        }
    }

    pub fn finish(self) -> Result<SessionOutcome> {
        match (self.expect, self.state, self.peer_digest) {
            (Expect::Done, Some(state), Some(peer)) => conclude(state, peer),
            (e, _, _) => Err(Error::Protocol(format!("session ended while waiting for {}", e.name()))),
        }
    }
}

/// Runs the responder side over an established stream. The confirmation
/// digest is sent before a mismatch is reported.
pub fn respond<S, R>(stream: &mut S, params: &PublicParams, rng: &mut R) -> Result<SessionOutcome>
where
    S: Read + Write + ?Sized,
    R: Rng + ?Sized,
{
    let (mut session, offer) = Responder::new(params, rng)?;
    send(stream, &offer)?;
    while !session.is_done() {
        let msg = recv(stream, Some(session.modulus()))?;
        if let Some(reply) = session.handle(msg)? {
            send(stream, &reply)?;
        }
    }
    session.finish()
}

/// Runs the initiator side over an established stream.
pub fn initiate<S, R>(stream: &mut S, rng: &mut R) -> Result<SessionOutcome>
where
    S: Read + Write + ?Sized,
    R: Rng + ?Sized,
{
    let mut session = Initiator::new();
    while !session.is_done() {
        let msg = recv(stream, session.modulus())?;
        if let Some(reply) = session.handle(msg, rng)? {
            send(stream, &reply)?;
        }
    }
    session.finish()
}

fn prepare(stream: &TcpStream) -> Result<()> {
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    stream.set_nodelay(true)?;
    Ok(())
}

/// Binds `listen_addr` and serves a single session.
pub fn serve<A, R>(listen_addr: A, params: &PublicParams, rng: &mut R) -> Result<SessionOutcome>
where
    A: ToSocketAddrs,
    R: Rng + ?Sized,
{
    serve_on(&TcpListener::bind(listen_addr)?, params, rng)
}

/// Accepts one connection on an already bound listener.
pub fn serve_on<R: Rng + ?Sized>(listener: &TcpListener, params: &PublicParams, rng: &mut R) -> Result<SessionOutcome> {
    let (mut stream, _) = listener.accept()?;
    prepare(&stream)?;
    respond(&mut stream, params, rng)
}

pub fn connect<A, R>(remote_addr: A, rng: &mut R) -> Result<SessionOutcome>
where
    A: ToSocketAddrs,
    R: Rng + ?Sized,
{
    let mut stream = TcpStream::connect(remote_addr)?;
    prepare(&stream)?;
    initiate(&mut stream, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToServer,
    ToClient,
}

/// A frame body seen by [`relay_once`], in arrival order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapturedFrame {
    pub direction: Direction,
    pub body: Vec<u8>,
}

impl CapturedFrame {
    pub fn msg_type(&self) -> Option<u8> {
        self.body.get(5).copied()
    }
}

/// Accepts one client on `listener`, connects it to `upstream` and forwards
/// frames in both directions until either side closes. `tamper` may edit
/// each frame before it is forwarded; the capture holds what was forwarded.
pub fn relay_once<F>(listener: &TcpListener, upstream: SocketAddr, tamper: F) -> Result<Vec<CapturedFrame>>
where
    F: FnMut(Direction, &mut Vec<u8>) + Send,
{
    let (client, _) = listener.accept()?;
    let server = TcpStream::connect(upstream)?;
    prepare(&client)?;
    prepare(&server)?;
    let captured = Mutex::new(Vec::new());
    let tamper = Mutex::new(tamper);

    let pump = |mut src: TcpStream, mut dst: TcpStream, dir: Direction| {
        while let Ok(mut body) = read_frame(&mut src) {
            (tamper.lock().unwrap())(dir, &mut body);
            captured.lock().unwrap().push(CapturedFrame { direction: dir, body: body.clone() });
            if write_frame(&mut dst, &body).is_err() {
                break;
            }
        }
        let _ = dst.shutdown(Shutdown::Write);
    };
    let (c2, s2) = (client.try_clone()?, server.try_clone()?);
    thread::scope(|s| {
        s.spawn(|| pump(client, server, Direction::ToServer));
        s.spawn(|| pump(s2, c2, Direction::ToClient));
    });
    Ok(captured.into_inner().unwrap())
}
