use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use super::packet::{encode, Command, DecodeError, Opcode, Packet, Payload, StreamDecoder};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Blocking protocol client.
pub struct Client {
    stream: TcpStream,
    decoder: StreamDecoder,
    seq: u32,
    buf: Vec<u8>,
}

impl Client {
    pub fn connect(addr: SocketAddr, timeout: Duration) -> Result<Self, ClientError> {
        let stream = TcpStream::connect_timeout(&addr, timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        Ok(Client {
            stream,
            decoder: StreamDecoder::new(),
            seq: 0,
            buf: vec![0; 64 * 1024],
        })
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.stream.set_read_timeout(timeout)
    }

    pub fn send(&mut self, opcode: Opcode, arg: u32) -> Result<(), ClientError> {
        let p = Packet::new(self.seq, 0, Payload::Command(Command { opcode, arg }));
        self.seq += 1;
        let bytes = encode(&p).expect("command packets always encode");
        self.stream.write_all(&bytes)?;
        Ok(())
    }

    /// Raw bytes straight onto the socket.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    /// Next packet and its bytes; `None` once the server has closed the
    /// stream.
    pub fn next_packet(&mut self) -> Result<Option<(Packet, Vec<u8>)>, ClientError> {
        loop {
            if let Some(r) = self.decoder.next_packet() {
                return Ok(Some(r?));
            }
            let n = match self.stream.read(&mut self.buf) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::ConnectionReset => 0,
                Err(e) => return Err(e.into()),
            };
            if n == 0 {
                return Ok(None);
            }
            self.decoder.push(&self.buf[..n]);
        }
    }

    /// Reads until the server closes the connection.
    pub fn read_to_end(&mut self) -> Result<Vec<(Packet, Vec<u8>)>, ClientError> {
        let mut out = Vec::new();
        while let Some(p) = self.next_packet()? {
            out.push(p);
        }
        Ok(out)
    }
}
