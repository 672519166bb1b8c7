use ego_tree::NodeRef;
use scraper::{Html, Node};

/// Elements whose contents are never visible text.
const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "head", "iframe", "object", "svg"];

/// Elements that do not break a line of text.
const INLINE: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd", "mark", "q", "s", "samp",
    "small", "span", "strong", "sub", "sup", "time", "u", "var", "wbr",
];

enum Step<'a> {
    Visit(NodeRef<'a, Node>),
    Break,
}

/// Extracts visible text from (possibly malformed) HTML.
///
/// Script, style and similar elements are dropped, tags are stripped, entities
/// decoded and whitespace collapsed. Block-level boundaries become spaces.
/// Any `<` that would start something tag-like in the output (`</`, `<a`,
/// `<!`) is followed by a space, so the result can never be re-read as markup.
pub fn extract_text(html: &[u8]) -> String {
    let source = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&source);

    let mut raw = String::with_capacity(source.len() / 2);
    let mut stack = vec![Step::Visit(doc.tree.root())];
    while let Some(step) = stack.pop() {
        let node = match step {
            Step::Break => {
                raw.push(' ');
                continue;
            }
            Step::Visit(node) => node,
        };
        match node.value() {
            Node::Text(text) => raw.push_str(text),
            Node::Element(el) => {
                let name = el.name();
                if SKIPPED.contains(&name) {
                    continue;
                }
                let block = !INLINE.contains(&name);
                if block {
                    raw.push(' ');
                    stack.push(Step::Break);
                }
                push_children(&mut stack, node);
            }
            Node::Document | Node::Fragment => push_children(&mut stack, node),
            _ => {}
        }
    }

    defang(&raw.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn push_children<'a>(stack: &mut Vec<Step<'a>>, node: NodeRef<'a, Node>) {
    // Reverse so the first child is popped first.
    let children: Vec<_> = node.children().collect();
    stack.extend(children.into_iter().rev().map(Step::Visit));
}

fn defang(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<' {
            if let Some(&next) = chars.peek() {
                if next.is_ascii_alphabetic() || matches!(next, '/' | '!' | '?') {
                    out.push(' ');
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_scripts() {
        assert_eq!(extract_text(b"<p>Hello</p><script>x()</script>"), "Hello");
        assert_eq!(extract_text(b"<style>p{color:red}</style><p>Hi</p><noscript>no</noscript>"), "Hi");
    }

    #[test]
    fn decodes_entities() {
        assert_eq!(extract_text(b"<div>a &amp; b</div>"), "a & b");
        assert_eq!(extract_text(b"<p>caf&eacute; &#8212; &lt;ok&gt;</p>"), "café — < ok>");
    }

    #[test]
    fn blocks_separate_inline_does_not() {
        assert_eq!(extract_text(b"<ul><li>one</li><li>two</li></ul>"), "one two");
        assert_eq!(extract_text(b"<p>al<b>pha</b>bet</p>"), "alphabet");
        assert_eq!(extract_text(b"line<br>break"), "line break");
    }

    #[test]
    fn tolerates_garbage() {
        assert_eq!(extract_text(b""), "");
        assert_eq!(extract_text(b"<<<>>>"), "<<<>>>");
        assert_eq!(extract_text(b"a &lt;/b"), "a < /b");
        assert_eq!(extract_text(b"<div><p>unclosed <span>tags"), "unclosed tags");
        assert_eq!(extract_text(&[0xff, 0xfe, b'h', b'i']), "\u{fffd}\u{fffd}hi");
    }

    #[test]
    fn escaped_markup_is_defanged() {
        let out = extract_text(b"<p>&lt;/p&gt; &lt;script&gt;alert(1)&lt;/script&gt;</p>");
        assert!(!out.contains("</"), "{out}");
        assert!(!out.contains("<script"), "{out}");
    }

    #[test]
    fn head_title_is_not_body_text() {
        let html = b"<html><head><title>T</title><meta charset=utf-8></head><body>Body</body></html>";
        assert_eq!(extract_text(html), "Body");
    }
}
