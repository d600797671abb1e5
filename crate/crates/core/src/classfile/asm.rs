//! A line-oriented assembly syntax for writing class files by hand.
//!
//! ```text
//! class org.acme.Parser extends java.lang.Object
//! field private depth I
//! method public static clamp (I)I
//!   iload 0
//!   ifge done
//!   push 0
//!   ireturn
//! done:
//!   iload 0
//!   ireturn
//! end
//! ```
//!
//! Owners and class operands are dotted names; descriptors use the JVM form.
//! `push n` and `lpush n` pick the shortest int/long constant encoding, while
//! `bipush n`, `sipush n` and `ldc n` force one. `ldc "text"` loads a
//! string, and `try start end handler type|any` adds an exception-table row. `#` starts a comment. Abstract and native methods
//! have no body and no `end`.

use std::collections::HashMap;

use thiserror::Error;

use super::builder::{ClassBuilder, CodeBuilder, Label};
use super::code::Operand;
use super::constant_pool::Constant;
use super::opcodes::*;
use super::{ClassFile, ClassFileError, ACC_ABSTRACT, ACC_BRIDGE, ACC_FINAL, ACC_INTERFACE, ACC_NATIVE, ACC_PRIVATE, ACC_PROTECTED, ACC_PUBLIC, ACC_STATIC, ACC_SYNTHETIC};

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct AsmError {
    pub line: usize,
    pub message: String,
}

fn flag(word: &str) -> Option<u16> {
    Some(match word {
        "public" => ACC_PUBLIC,
        "private" => ACC_PRIVATE,
        "protected" => ACC_PROTECTED,
        "static" => ACC_STATIC,
        "final" => ACC_FINAL,
        "synthetic" => ACC_SYNTHETIC,
        "bridge" => ACC_BRIDGE,
        "abstract" => ACC_ABSTRACT,
        "native" => ACC_NATIVE,
        _ => return None,
    })
}

fn array_type(name: &str) -> Option<u8> {
    Some(match name {
        "boolean" => 4,
        "char" => 5,
        "float" => 6,
        "double" => 7,
        "byte" => 8,
        "short" => 9,
        "int" => 10,
        "long" => 11,
        _ => return None,
    })
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(s: &str) -> Option<String> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            'n' => '\n',
            't' => '\t',
            other => other,
        });
    }
    Some(out)
}

struct Method<'p> {
    code: CodeBuilder<'p>,
    labels: HashMap<String, Label>,
    placed: Vec<String>,
}

impl Method<'_> {
    fn label(&mut self, name: &str) -> Label {
        if let Some(l) = self.labels.get(name) {
            return *l;
        }
        let l = self.code.label();
        self.labels.insert(name.to_string(), l);
        l
    }

    fn insn(&mut self, words: &[&str], raw: &str) -> Result<(), String> {
        let err = |e: ClassFileError| e.to_string();
        let arg = |i: usize| words.get(i).copied().ok_or_else(|| format!("`{}` needs {} operand(s)", words[0], i));
        let num = |i: usize| -> Result<i64, String> { arg(i)?.parse::<i64>().map_err(|e| format!("bad number: {e}")) };
        let mnemonic = words[0];
        match mnemonic {
            "push" => {
                self.code.iconst(num(1)? as i32).map_err(err)?;
            }
            "lpush" => {
                self.code.lconst(num(1)?).map_err(err)?;
            }
            "bipush" => {
                let v = i8::try_from(num(1)?).map_err(|e| e.to_string())?;
                self.code.raw(BIPUSH, Operand::Byte(v));
            }
            "sipush" => {
                let v = i16::try_from(num(1)?).map_err(|e| e.to_string())?;
                self.code.raw(SIPUSH, Operand::Short(v));
            }
            "ldc" => {
                let text = raw.trim_start().strip_prefix("ldc").unwrap_or("").trim();
                if let Ok(v) = text.parse::<i32>() {
                    let idx = self.code.pool().intern(Constant::Integer(v)).map_err(err)?;
                    self.code.ldc(idx);
                } else {
                    let s = unquote(text).ok_or("ldc expects an int or a quoted string")?;
                    self.code.sconst(&s).map_err(err)?;
                }
            }
            "iinc" => {
                self.code.iinc(num(1)? as u16, num(2)? as i16);
            }
            "newarray" => {
                let t = array_type(arg(1)?).ok_or("unknown array element type")?;
                self.code.raw(NEWARRAY, Operand::ArrayType(t));
            }
            "tableswitch" => {
                let low = num(1)? as i32;
                let default = self.label(arg(2)?);
                let targets = words[3..].iter().map(|l| self.label(l)).collect();
                self.code.tableswitch(low, default, targets);
            }
            "lookupswitch" => {
                let default = self.label(arg(1)?);
                let mut pairs = Vec::new();
                for w in &words[2..] {
                    let (k, l) = w.split_once(':').ok_or("lookupswitch pairs are key:label")?;
                    pairs.push((k.parse::<i32>().map_err(|e| e.to_string())?, self.label(l)));
                }
                self.code.lookupswitch(default, pairs);
            }
            "try" => {
                let (s, e, h) = (self.label(arg(1)?), self.label(arg(2)?), self.label(arg(3)?));
                let ty = arg(4)?;
                self.code.try_catch(s, e, h, (ty != "any").then_some(ty)).map_err(err)?;
            }
            _ => {
                let op = from_mnemonic(mnemonic).ok_or_else(|| format!("unknown mnemonic `{mnemonic}`"))?;
                match op {
                    ILOAD..=ALOAD | ISTORE..=ASTORE => {
                        self.code.local(op, num(1)? as u16);
                    }
                    _ if is_conditional(op) || op == GOTO => {
                        let l = self.label(arg(1)?);
                        self.code.branch(op, l);
                    }
                    GETFIELD | PUTFIELD | GETSTATIC | PUTSTATIC => {
                        self.code.field(op, arg(1)?, arg(2)?, arg(3)?).map_err(err)?;
                    }
                    INVOKEVIRTUAL | INVOKESPECIAL | INVOKESTATIC | INVOKEINTERFACE => {
                        self.code.invoke(op, arg(1)?, arg(2)?, arg(3)?).map_err(err)?;
                    }
                    NEW | ANEWARRAY | CHECKCAST | INSTANCEOF => {
                        self.code.type_op(op, arg(1)?).map_err(err)?;
                    }
                    LDC | LDC_W | LDC2_W | INVOKEDYNAMIC | MULTIANEWARRAY | JSR | JSR_W | RET | GOTO_W | WIDE => {
                        return Err(format!("`{mnemonic}` is not supported by the assembler"));
                    }
                    _ => {
                        if words.len() > 1 {
                            return Err(format!("`{mnemonic}` takes no operands"));
                        }
                        self.code.op(op);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Assembles every `class` block in `text`.
pub fn assemble_classes(text: &str) -> Result<Vec<ClassFile>, AsmError> {
    let mut out = Vec::new();
    let mut builder: Option<ClassBuilder> = None;
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line_no = i + 1;
        let fail = |message: String| AsmError { line: line_no, message };
        let raw = strip_comment(lines[i]);
        i += 1;
        let words: Vec<&str> = raw.split_whitespace().collect();
        let Some(&head) = words.first() else { continue };
        match head {
            "class" | "interface" => {
                if let Some(b) = builder.take() {
                    out.push(b.build());
                }
                let name = words.get(1).ok_or_else(|| fail("missing class name".into()))?;
                let mut b = ClassBuilder::new(name).map_err(|e| fail(e.to_string()))?;
                if head == "interface" {
                    b = b.access_flags(ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT);
                }
                let mut rest = words[2..].iter();
                while let Some(w) = rest.next() {
                    let target = rest.next().ok_or_else(|| fail(format!("`{w}` needs a class name")))?;
                    b = match *w {
                        "extends" => b.super_class(target),
                        "implements" => b.interface(target),
                        _ => return Err(fail(format!("unexpected `{w}`"))),
                    }
                    .map_err(|e| fail(e.to_string()))?;
                }
                builder = Some(b);
            }
            "field" | "method" => {
                let b = builder.as_mut().ok_or_else(|| fail(format!("`{head}` outside a class")))?;
                let mut flags = 0u16;
                let mut k = 1;
                while let Some(f) = words.get(k).and_then(|w| flag(w)) {
                    flags |= f;
                    k += 1;
                }
                let (Some(name), Some(desc)) = (words.get(k), words.get(k + 1)) else {
                    return Err(fail(format!("`{head}` needs flags, a name and a descriptor")));
                };
                if head == "field" {
                    b.field(flags, name, desc).map_err(|e| fail(e.to_string()))?;
                    continue;
                }
                if flags & (ACC_ABSTRACT | ACC_NATIVE) != 0 {
                    b.method(flags, name, desc, None).map_err(|e| fail(e.to_string()))?;
                    continue;
                }
                let mut m = Method {
                    code: b.code(),
                    labels: HashMap::new(),
                    placed: Vec::new(),
                };
                let mut closed = false;
                while i < lines.len() {
                    let line_no = i + 1;
                    let raw = strip_comment(lines[i]);
                    i += 1;
                    let words: Vec<&str> = raw.split_whitespace().collect();
                    let fail = |message: String| AsmError { line: line_no, message };
                    match words.as_slice() {
                        [] => {}
                        ["end"] => {
                            closed = true;
                            break;
                        }
                        [l] if l.ends_with(':') => {
                            let name = l.trim_end_matches(':');
                            if m.placed.iter().any(|p| p == name) {
                                return Err(fail(format!("label `{name}` placed twice")));
                            }
                            m.placed.push(name.to_string());
                            let label = m.label(name);
                            m.code.place(label);
                        }
                        _ => m.insn(&words, raw).map_err(fail)?,
                    }
                }
                if !closed {
                    return Err(fail(format!("method `{name}` has no `end`")));
                }
                let code = m.code.finish().map_err(|e| fail(e.to_string()))?;
                b.method(flags, name, desc, Some(code)).map_err(|e| fail(e.to_string()))?;
            }
            _ => return Err(fail(format!("unexpected `{head}`"))),
        }
    }
    if let Some(b) = builder {
        out.push(b.build());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::{emit_class, list_constructs, parse_class};

    #[test]
    fn assembles_branches_fields_and_handlers() {
        let src = r#"
class a.C
field private baz I
method public static clamp (I)I   # keep non-negative
  iload 0
  ifge done
  push 0
  ireturn
done:
  iload 0
  ireturn
end
method public guarded ()Ljava/lang/String;
start:
  ldc "hash#mark \"q\""
  areturn
stop:
catch:
  pop
  ldc ""
  areturn
  try start stop catch java.lang.RuntimeException
end
method public abstract gone ()V
"#;
        let classes = assemble_classes(src).unwrap();
        assert_eq!(classes.len(), 1);
        let c = parse_class(&emit_class(&classes[0]).unwrap()).unwrap();
        let names: Vec<String> = list_constructs(&c).unwrap().into_iter().map(|i| i.fqn).collect();
        assert_eq!(names, ["a.C", "a.C: int clamp(int)", "a.C: java.lang.String guarded()", "a.C: void gone()"]);
        let guarded = c.methods[1].code().unwrap();
        assert_eq!(guarded.exception_table.len(), 1);
        assert!(c.constant_pool.iter().any(|(_, k)| matches!(k, crate::classfile::Constant::Utf8(s) if s == "hash#mark \"q\"")));
    }

    #[test]
    fn reports_line_numbers() {
        let e = assemble_classes("class a.C\nmethod public static f ()V\n  frobnicate\nend\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(assemble_classes("class a.C\nmethod public static f ()V\n  goto nowhere\nend\n").is_err());
        assert!(assemble_classes("class a.C\nmethod public static f ()V\n  return\n").is_err());
    }
}
