//! ISO 10303-21 (STEP Physical File) parsing into an entity table.
//!
//! The parser reads the full STEP syntax but does not validate against the
//! EXPRESS schema; attribute meaning is resolved positionally by downstream
//! modules. Dangling references are an error by default since every
//! relation we consume is reference-based; [`ParseOptions::allow_dangling_refs`]
//! downgrades them for salvaging real-world exports.

mod tokenize;

pub use tokenize::{tokenize, Token, TokenKind};

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One attribute slot of a STEP record.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    /// `$`
    Unset,
    /// `*`
    Derived,
    Integer(i64),
    Real(f64),
    Text(String),
    /// Enumeration name without the delimiting dots.
    Enum(String),
    Boolean(bool),
    /// `#N`
    Ref(u64),
    List(Vec<AttrValue>),
    /// `IFCREAL(1.5)` style wrapped value.
    Typed { name: String, value: Box<AttrValue> },
}

impl AttrValue {
    /// Strip `Typed` wrappers, recursively.
    pub fn unwrapped(&self) -> &AttrValue {
        match self {
            AttrValue::Typed { value, .. } => value.unwrapped(),
            other => other,
        }
    }

    pub fn as_ref_id(&self) -> Option<u64> {
        match self.unwrapped() {
            AttrValue::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self.unwrapped() {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self.unwrapped() {
            AttrValue::Real(v) => Some(*v),
            AttrValue::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_enum(&self) -> Option<&str> {
        match self.unwrapped() {
            AttrValue::Enum(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[AttrValue]> {
        match self.unwrapped() {
            AttrValue::List(items) => Some(items),
            _ => None,
        }
    }

    fn collect_refs(&self, out: &mut Vec<u64>) {
        match self {
            AttrValue::Ref(id) => out.push(*id),
            AttrValue::List(items) => items.iter().for_each(|v| v.collect_refs(out)),
            AttrValue::Typed { value, .. } => value.collect_refs(out),
            _ => {}
        }
    }
}

/// One parsed `#id = TYPE(args);` record.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityInstance {
    pub id: u64,
    /// Uppercase ASCII name, e.g. `IFCWALLSTANDARDCASE`.
    pub type_name: String,
    pub attrs: Vec<AttrValue>,
    /// Byte offset of the record in the source, for error reporting.
    pub offset: usize,
}

/// The parsed DATA section of one file, immutable after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntityTable {
    pub entities: BTreeMap<u64, EntityInstance>,
    /// Text from FILE_SCHEMA, e.g. `IFC4`.
    pub schema_name: String,
    /// type name -> ascending id list; jointly covers every entity once.
    pub by_type: BTreeMap<String, Vec<u64>>,
    /// Referenced ids with no record, only populated under
    /// `allow_dangling_refs`; non-empty means partially resolved.
    pub dangling_refs: Vec<u64>,
    /// SHA-256 of the source text, hex.
    pub source_digest: String,
}

impl EntityTable {
    pub fn get(&self, id: u64) -> Option<&EntityInstance> {
        self.entities.get(&id)
    }

    /// Ascending ids of all entities with the given (uppercase) type name.
    pub fn ids_of_type(&self, type_name: &str) -> &[u64] {
        self.by_type.get(type_name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Follow an attribute that should be a reference.
    pub fn deref(&self, value: &AttrValue) -> Option<&EntityInstance> {
        self.entities.get(&value.as_ref_id()?)
    }

    pub fn is_partially_resolved(&self) -> bool {
        !self.dangling_refs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Record dangling references on the table instead of failing.
    pub allow_dangling_refs: bool,
}

/// Parse STEP text with default (strict) options.
pub fn parse_step(text: &str) -> Result<EntityTable> {
    parse_step_with(text, ParseOptions::default())
}

pub fn parse_step_with(text: &str, options: ParseOptions) -> Result<EntityTable> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens: &tokens, pos: 0 };
    let mut table = parser.file()?;

    let mut missing: Vec<u64> = Vec::new();
    for entity in table.entities.values() {
        let mut refs = Vec::new();
        for attr in &entity.attrs {
            attr.collect_refs(&mut refs);
        }
        for target in refs {
            if !table.entities.contains_key(&target) {
                if options.allow_dangling_refs {
                    missing.push(target);
                } else {
                    return Err(Error::DanglingRef { from: entity.id, to: target });
                }
            }
        }
    }
    missing.sort_unstable();
    missing.dedup();
    table.dangling_refs = missing;
    table.source_digest = hex_digest(text.as_bytes());
    Ok(table)
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Fetch one attribute of one entity.
pub fn get_attr<'t>(table: &'t EntityTable, id: u64, index: usize) -> Result<&'t AttrValue> {
    let entity = table.get(id).ok_or(Error::NoSuchEntity(id))?;
    entity
        .attrs
        .get(index)
        .ok_or(Error::IndexOutOfRange { id, index, len: entity.attrs.len() })
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .or_else(|| self.tokens.last().map(|t| t.offset + 1))
            .unwrap_or(0)
    }

    fn bump(&mut self) -> Option<&'t TokenKind> {
        let t = self.tokens.get(self.pos).map(|t| &t.kind);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &TokenKind, what: &str) -> Result<()> {
        let offset = self.offset();
        match self.bump() {
            Some(kind) if kind == want => Ok(()),
            _ => Err(Error::Syntax { offset, expected: what.to_string() }),
        }
    }

    fn expect_keyword(&mut self, name: &str) -> Result<()> {
        let offset = self.offset();
        match self.bump() {
            Some(TokenKind::Keyword(k)) if k == name => Ok(()),
            _ => Err(Error::Syntax { offset, expected: format!("keyword {name}") }),
        }
    }

    fn file(&mut self) -> Result<EntityTable> {
        self.expect_keyword("ISO-10303-21")?;
        self.expect(&TokenKind::Semicolon, "';'")?;

        if !matches!(self.peek(), Some(TokenKind::Keyword(k)) if k == "HEADER") {
            return Err(Error::MissingSection { section: "HEADER" });
        }
        self.bump();
        self.expect(&TokenKind::Semicolon, "';'")?;
        let schema_name = self.header_records()?;

        if !matches!(self.peek(), Some(TokenKind::Keyword(k)) if k == "DATA") {
            return Err(Error::MissingSection { section: "DATA" });
        }
        self.bump();
        self.expect(&TokenKind::Semicolon, "';'")?;

        let mut entities: BTreeMap<u64, EntityInstance> = BTreeMap::new();
        let mut offsets: HashMap<u64, usize> = HashMap::new();
        loop {
            match self.peek() {
                Some(TokenKind::Keyword(k)) if k == "ENDSEC" => {
                    self.bump();
                    self.expect(&TokenKind::Semicolon, "';'")?;
                    break;
                }
                Some(TokenKind::Id(_)) => {
                    let record_offset = self.offset();
                    let entity = self.data_record(record_offset)?;
                    if let Some(&first) = offsets.get(&entity.id) {
                        return Err(Error::DuplicateId {
                            id: entity.id,
                            first,
                            second: record_offset,
                        });
                    }
                    offsets.insert(entity.id, record_offset);
                    entities.insert(entity.id, entity);
                }
                _ => {
                    return Err(Error::Syntax {
                        offset: self.offset(),
                        expected: "'#id =' record or ENDSEC".into(),
                    })
                }
            }
        }
        self.expect_keyword("END-ISO-10303-21")?;
        self.expect(&TokenKind::Semicolon, "';'")?;

        let mut by_type: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for entity in entities.values() {
            by_type.entry(entity.type_name.clone()).or_default().push(entity.id);
        }

        Ok(EntityTable {
            entities,
            schema_name,
            by_type,
            dangling_refs: Vec::new(),
            source_digest: String::new(),
        })
    }

    /// Consume header records up to ENDSEC, returning the FILE_SCHEMA name.
    fn header_records(&mut self) -> Result<String> {
        let mut schema_name = String::new();
        loop {
            match self.peek() {
                Some(TokenKind::Keyword(k)) if k == "ENDSEC" => {
                    self.bump();
                    self.expect(&TokenKind::Semicolon, "';'")?;
                    return Ok(schema_name);
                }
                Some(TokenKind::Keyword(_)) => {
                    let name = match self.bump() {
                        Some(TokenKind::Keyword(k)) => k.clone(),
                        _ => unreachable!(),
                    };
                    self.expect(&TokenKind::LParen, "'('")?;
                    let args = self.arg_list()?;
                    self.expect(&TokenKind::Semicolon, "';'")?;
                    if name == "FILE_SCHEMA" {
                        // FILE_SCHEMA(('IFC4'));
                        if let Some(AttrValue::List(items)) = args.first() {
                            if let Some(AttrValue::Text(s)) = items.first() {
                                schema_name = s.clone();
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::Syntax {
                        offset: self.offset(),
                        expected: "header record or ENDSEC".into(),
                    })
                }
            }
        }
    }

    fn data_record(&mut self, record_offset: usize) -> Result<EntityInstance> {
        let id = match self.bump() {
            Some(TokenKind::Id(id)) => *id,
            _ => unreachable!("caller checked"),
        };
        if id == 0 {
            return Err(Error::Syntax { offset: record_offset, expected: "positive entity id".into() });
        }
        self.expect(&TokenKind::Equals, "'='")?;
        let type_name = match self.bump() {
            Some(TokenKind::Keyword(k)) => k.clone(),
            _ => {
                return Err(Error::Syntax {
                    offset: self.offset().saturating_sub(1),
                    expected: "entity type keyword (complex instances unsupported)".into(),
                })
            }
        };
        self.expect(&TokenKind::LParen, "'('")?;
        let attrs = self.arg_list()?;
        self.expect(&TokenKind::Semicolon, "';'")?;
        Ok(EntityInstance { id, type_name, attrs, offset: record_offset })
    }

    /// Parse a comma-separated argument list; the opening paren is already
    /// consumed, the closing one is consumed here.
    fn arg_list(&mut self) -> Result<Vec<AttrValue>> {
        let mut args = Vec::new();
        if matches!(self.peek(), Some(TokenKind::RParen)) {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.value()?);
            match self.bump() {
                Some(TokenKind::Comma) => continue,
                Some(TokenKind::RParen) => return Ok(args),
                _ => {
                    return Err(Error::Syntax {
                        offset: self.offset().saturating_sub(1),
                        expected: "',' or ')'".into(),
                    })
                }
            }
        }
    }

    fn value(&mut self) -> Result<AttrValue> {
        let offset = self.offset();
        match self.bump() {
            Some(TokenKind::Unset) => Ok(AttrValue::Unset),
            Some(TokenKind::Derived) => Ok(AttrValue::Derived),
            Some(TokenKind::Integer(v)) => Ok(AttrValue::Integer(*v)),
            Some(TokenKind::Real(v)) => Ok(AttrValue::Real(*v)),
            Some(TokenKind::Str(s)) => Ok(AttrValue::Text(s.clone())),
            Some(TokenKind::Binary(s)) => Ok(AttrValue::Text(s.clone())),
            Some(TokenKind::Id(id)) => {
                if *id == 0 {
                    return Err(Error::Syntax { offset, expected: "positive reference id".into() });
                }
                Ok(AttrValue::Ref(*id))
            }
            Some(TokenKind::Enum(name)) => match name.as_str() {
                "T" => Ok(AttrValue::Boolean(true)),
                "F" => Ok(AttrValue::Boolean(false)),
                _ => Ok(AttrValue::Enum(name.clone())),
            },
            Some(TokenKind::LParen) => Ok(AttrValue::List(self.arg_list()?)),
            Some(TokenKind::Keyword(name)) => {
                let name = name.clone();
                self.expect(&TokenKind::LParen, "'(' after type keyword")?;
                let mut inner = self.arg_list()?;
                if inner.len() != 1 {
                    return Err(Error::Syntax {
                        offset,
                        expected: "exactly one value inside typed parameter".into(),
                    });
                }
                Ok(AttrValue::Typed { name, value: Box::new(inner.remove(0)) })
            }
            _ => Err(Error::Syntax { offset, expected: "attribute value".into() }),
        }
    }
}

/// Render a table back to STEP text with a canonical header. The output
/// re-parses to an equal table; it is a test aid, not a modeling feature.
pub fn unparse(table: &EntityTable) -> String {
    let mut out = String::new();
    out.push_str("ISO-10303-21;\nHEADER;\n");
    out.push_str("FILE_DESCRIPTION((''),'2;1');\n");
    out.push_str("FILE_NAME('','',(''),(''),'','','');\n");
    out.push_str(&format!("FILE_SCHEMA(('{}'));\n", escape_text(&table.schema_name)));
    out.push_str("ENDSEC;\nDATA;\n");
    for entity in table.entities.values() {
        out.push_str(&format!("#{}={}(", entity.id, entity.type_name));
        for (i, attr) in entity.attrs.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_value(&mut out, attr);
        }
        out.push_str(");\n");
    }
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    out
}

fn write_value(out: &mut String, value: &AttrValue) {
    match value {
        AttrValue::Unset => out.push('$'),
        AttrValue::Derived => out.push('*'),
        AttrValue::Integer(v) => out.push_str(&v.to_string()),
        AttrValue::Real(v) => out.push_str(&format_step_real(*v)),
        AttrValue::Text(s) => {
            out.push('\'');
            out.push_str(&escape_text(s));
            out.push('\'');
        }
        AttrValue::Enum(name) => {
            out.push('.');
            out.push_str(name);
            out.push('.');
        }
        AttrValue::Boolean(true) => out.push_str(".T."),
        AttrValue::Boolean(false) => out.push_str(".F."),
        AttrValue::Ref(id) => out.push_str(&format!("#{id}")),
        AttrValue::List(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(')');
        }
        AttrValue::Typed { name, value } => {
            out.push_str(name);
            out.push('(');
            write_value(out, value);
            out.push(')');
        }
    }
}

fn escape_text(s: &str) -> String {
    s.replace('\'', "''")
}

/// STEP reals must carry a '.' or exponent; Rust's debug formatting of f64
/// guarantees one and round-trips exactly.
pub(crate) fn format_step_real(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(data: &str) -> String {
        format!(
            "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION((''),'2;1');\n\
             FILE_NAME('','',(''),(''),'','','');\nFILE_SCHEMA(('IFC4'));\nENDSEC;\n\
             DATA;\n{data}ENDSEC;\nEND-ISO-10303-21;\n"
        )
    }

    #[test]
    fn forward_reference_resolves() {
        let table = parse_step(&wrap("#1=IFCWALL('a',$,#2);\n#2=IFCSLAB('b',$,$);\n")).unwrap();
        assert_eq!(table.entities.len(), 2);
        let wall = table.get(1).unwrap();
        assert_eq!(wall.attrs[2], AttrValue::Ref(2));
        assert!(table.deref(&wall.attrs[2]).is_some());
        assert_eq!(table.schema_name, "IFC4");
    }

    #[test]
    fn empty_data_section_is_valid() {
        let table = parse_step(&wrap("")).unwrap();
        assert_eq!(table.entities.len(), 0);
        assert!(!table.is_partially_resolved());
    }

    #[test]
    fn missing_data_section() {
        let text = "ISO-10303-21;\nHEADER;\nFILE_SCHEMA(('IFC4'));\nENDSEC;\nEND-ISO-10303-21;\n";
        match parse_step(text) {
            Err(Error::MissingSection { section }) => assert_eq!(section, "DATA"),
            other => panic!("expected MissingSection, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_reports_both_offsets() {
        let text = wrap("#1=IFCWALL($);\n#1=IFCSLAB($);\n");
        match parse_step(&text) {
            Err(Error::DuplicateId { id, first, second }) => {
                assert_eq!(id, 1);
                assert!(first < second);
                assert_eq!(&text[first..first + 2], "#1");
                assert_eq!(&text[second..second + 2], "#1");
            }
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn dangling_ref_strict_vs_permissive() {
        let text = wrap("#1=IFCWALL(#99);\n");
        match parse_step(&text) {
            Err(Error::DanglingRef { from, to }) => {
                assert_eq!((from, to), (1, 99));
            }
            other => panic!("expected DanglingRef, got {other:?}"),
        }
        let table =
            parse_step_with(&text, ParseOptions { allow_dangling_refs: true }).unwrap();
        assert!(table.is_partially_resolved());
        assert_eq!(table.dangling_refs, vec![99]);
    }

    #[test]
    fn typed_and_nested_values() {
        let table = parse_step(&wrap(
            "#1=IFCPROPERTYSINGLEVALUE('k',$,IFCTHERMALCONDUCTIVITYMEASURE(0.12),$);\n",
        ))
        .unwrap();
        let v = get_attr(&table, 1, 2).unwrap();
        match v {
            AttrValue::Typed { name, value } => {
                assert_eq!(name, "IFCTHERMALCONDUCTIVITYMEASURE");
                assert_eq!(**value, AttrValue::Real(0.12));
            }
            other => panic!("expected typed value, got {other:?}"),
        }
        assert_eq!(v.unwrapped(), &AttrValue::Real(0.12));
    }

    #[test]
    fn get_attr_errors() {
        let table = parse_step(&wrap("#1=IFCWALL('gid',$,#1);\n")).unwrap();
        assert!(matches!(get_attr(&table, 7, 0), Err(Error::NoSuchEntity(7))));
        assert!(matches!(
            get_attr(&table, 1, 9),
            Err(Error::IndexOutOfRange { id: 1, index: 9, len: 3 })
        ));
        assert_eq!(get_attr(&table, 1, 0).unwrap(), &AttrValue::Text("gid".into()));
        assert_eq!(get_attr(&table, 1, 1).unwrap(), &AttrValue::Unset);
        assert_eq!(get_attr(&table, 1, 2).unwrap(), &AttrValue::Ref(1));
    }

    #[test]
    fn by_type_covers_every_entity_once() {
        let table = parse_step(&wrap(
            "#3=IFCWALL($);\n#1=IFCWALL($);\n#2=IFCSLAB($);\n",
        ))
        .unwrap();
        assert_eq!(table.ids_of_type("IFCWALL"), &[1, 3]);
        assert_eq!(table.ids_of_type("IFCSLAB"), &[2]);
        let total: usize = table.by_type.values().map(Vec::len).sum();
        assert_eq!(total, table.entities.len());
        for ids in table.by_type.values() {
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn unparse_round_trips() {
        let text = wrap(
            "#1=IFCWALL('it''s',$,*,.NOTDEFINED.,.T.,(1,2.5,(#2)),IFCLABEL('x'));\n\
             #2=IFCSLAB('s',-4,1.0E-7);\n",
        );
        let table = parse_step(&text).unwrap();
        let rendered = unparse(&table);
        let reparsed = parse_step(&rendered).unwrap();
        assert_eq!(reparsed.entities, table.entities);
        assert_eq!(reparsed.schema_name, table.schema_name);
        assert_eq!(reparsed.by_type, table.by_type);
    }

    #[test]
    fn parsing_is_pure() {
        let text = wrap("#1=IFCWALL('a',1.25,$);\n");
        let a = parse_step(&text).unwrap();
        let b = parse_step(&text).unwrap();
        assert_eq!(a, b);
    }
}
