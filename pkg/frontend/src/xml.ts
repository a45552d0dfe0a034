/**
 * Minimal XML reader for the fixed XML-RPC grammar.
 *
 * Supports elements, text, entities and the XML declaration; attributes are
 * parsed but unused, and comments/CDATA are rejected since the protocol
 * never produces them.
 */

export interface XmlElement {
  tag: string;
  children: XmlElement[];
  text: string;
}

export class XmlParseError extends Error {}

const ENTITIES: Record<string, string> = {
  amp: "&",
  lt: "<",
  gt: ">",
  quot: '"',
  apos: "'",
};

export function decodeEntities(raw: string): string {
  return raw.replace(/&(#x?[0-9a-fA-F]+|[a-z]+);/g, (whole, body: string) => {
    if (body.startsWith("#x") || body.startsWith("#X")) {
      return String.fromCodePoint(parseInt(body.slice(2), 16));
    }
    if (body.startsWith("#")) {
      return String.fromCodePoint(parseInt(body.slice(1), 10));
    }
    const known = ENTITIES[body];
    if (known === undefined) {
      throw new XmlParseError(`unknown entity ${whole}`);
    }
    return known;
  });
}

export function escapeText(raw: string): string {
  return raw.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Parse one document and return its root element. */
export function parseXml(input: string): XmlElement {
  let pos = 0;

  const fail = (message: string): never => {
    throw new XmlParseError(`${message} at offset ${pos}`);
  };

  const skipProlog = () => {
    pos = input.search(/\S/);
    if (pos < 0) fail("empty document");
    if (input.startsWith("<?", pos)) {
      const end = input.indexOf("?>", pos);
      if (end < 0) fail("unterminated XML declaration");
      pos = end + 2;
      while (pos < input.length && /\s/.test(input[pos])) pos++;
    }
  };

  const readTagName = (): string => {
    const match = /^[A-Za-z_][\w.:-]*/.exec(input.slice(pos));
    if (!match) fail("expected a tag name");
    pos += match![0].length;
    return match![0];
  };

  const skipAttributes = () => {
    // Tolerated but ignored: the protocol does not use attributes.
    while (pos < input.length && !"/>".includes(input[pos])) {
      if (input[pos] === '"' || input[pos] === "'") {
        const quote = input[pos];
        const end = input.indexOf(quote, pos + 1);
        if (end < 0) fail("unterminated attribute value");
        pos = end + 1;
      } else {
        pos++;
      }
    }
  };

  const readElement = (): XmlElement => {
    if (input[pos] !== "<") fail("expected an element");
    pos++;
    const tag = readTagName();
    skipAttributes();
    const element: XmlElement = { tag, children: [], text: "" };
    if (input.startsWith("/>", pos)) {
      pos += 2;
      return element;
    }
    if (input[pos] !== ">") fail(`malformed start tag <${tag}`);
    pos++;
    for (;;) {
      if (pos >= input.length) fail(`unclosed element <${tag}>`);
      if (input.startsWith("</", pos)) {
        pos += 2;
        const closing = readTagName();
        if (closing !== tag) fail(`mismatched </${closing}> for <${tag}>`);
        if (input[pos] !== ">") fail("malformed end tag");
        pos++;
        return element;
      }
      if (input[pos] === "<") {
        if (input.startsWith("<!", pos) || input.startsWith("<?", pos)) {
          fail("unsupported markup");
        }
        element.children.push(readElement());
      } else {
        const next = input.indexOf("<", pos);
        const end = next < 0 ? input.length : next;
        element.text += decodeEntities(input.slice(pos, end));
        pos = end;
      }
    }
  };

  skipProlog();
  const root = readElement();
  if (input.slice(pos).trim() !== "") fail("trailing content after document");
  return root;
}

export function onlyChild(element: XmlElement, expected?: string): XmlElement {
  if (element.children.length !== 1) {
    throw new XmlParseError(
      `<${element.tag}> must have exactly one child, got ${element.children.length}`,
    );
  }
  const child = element.children[0];
  if (expected !== undefined && child.tag !== expected) {
    throw new XmlParseError(`expected <${expected}> inside <${element.tag}>, got <${child.tag}>`);
  }
  return child;
}
