/// XPath `fn:encode-for-uri`: every UTF-8 octet outside the RFC 3986
/// unreserved set (`ALPHA / DIGIT / - . _ ~`) becomes `%XX`, uppercase hex.
pub fn encode_for_uri(s: &str) -> String {
    const HEX: &[u8; 16] = b"0123456789ABCDEF";
    let mut out = String::with_capacity(s.len());
    for &b in s.as_bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push('%');
            out.push(HEX[(b >> 4) as usize] as char);
            out.push(HEX[(b & 0xf) as usize] as char);
        }
    }
    out
}
