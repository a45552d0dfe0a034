/**
 * XML-RPC wire codec matching the gateway dialect: scalar types int,
 * boolean, string, double, dateTime.iso8601 and base64 plus arrays and
 * structs. <nil> is not part of the protocol and is rejected both ways.
 */

import { XmlElement, XmlParseError, escapeText, onlyChild, parseXml } from "./xml.js";
import { faultFromStruct, FaultParse, RpcFault } from "./faults.js";

export type RpcValue =
  | number
  | boolean
  | string
  | Date
  | Uint8Array
  | RpcValue[]
  | { [key: string]: RpcValue };

// dateTime.iso8601 as emitted by the server: 20030501T12:34:56
const DATE_RE = /^(\d{4})(\d{2})(\d{2})T(\d{2}):(\d{2}):(\d{2})$/;

function formatDate(date: Date): string {
  const pad = (n: number, width = 2) => String(n).padStart(width, "0");
  return (
    `${pad(date.getFullYear(), 4)}${pad(date.getMonth() + 1)}${pad(date.getDate())}` +
    `T${pad(date.getHours())}:${pad(date.getMinutes())}:${pad(date.getSeconds())}`
  );
}

export function serializeValue(value: RpcValue): string {
  const out: string[] = [];
  writeValue(value, out);
  return out.join("");
}

function writeValue(value: RpcValue, out: string[]): void {
  out.push("<value>");
  if (typeof value === "boolean") {
    out.push(`<boolean>${value ? 1 : 0}</boolean>`);
  } else if (typeof value === "number") {
    if (Number.isInteger(value) && Math.abs(value) <= 0x7fffffff) {
      out.push(`<int>${value}</int>`);
    } else {
      out.push(`<double>${value}</double>`);
    }
  } else if (typeof value === "string") {
    out.push(`<string>${escapeText(value)}</string>`);
  } else if (value instanceof Date) {
    out.push(`<dateTime.iso8601>${formatDate(value)}</dateTime.iso8601>`);
  } else if (value instanceof Uint8Array) {
    out.push(`<base64>${Buffer.from(value).toString("base64")}</base64>`);
  } else if (Array.isArray(value)) {
    out.push("<array><data>");
    for (const item of value) writeValue(item, out);
    out.push("</data></array>");
  } else if (value !== null && typeof value === "object") {
    out.push("<struct>");
    for (const [key, item] of Object.entries(value)) {
      out.push(`<member><name>${escapeText(key)}</name>`);
      writeValue(item, out);
      out.push("</member>");
    }
    out.push("</struct>");
  } else {
    throw new TypeError(`cannot serialize ${String(value)} as an XML-RPC value`);
  }
  out.push("</value>");
}

export function serializeCall(method: string, params: RpcValue[]): string {
  const out: string[] = [
    '<?xml version="1.0"?>',
    `<methodCall><methodName>${escapeText(method)}</methodName><params>`,
  ];
  for (const param of params) {
    out.push("<param>");
    writeValue(param, out);
    out.push("</param>");
  }
  out.push("</params></methodCall>");
  return out.join("\n");
}

function parseValue(element: XmlElement): RpcValue {
  if (element.tag !== "value") {
    throw new XmlParseError(`expected <value>, got <${element.tag}>`);
  }
  if (element.children.length === 0) {
    return element.text; // bare <value>text</value> is a string
  }
  const typed = onlyChild(element);
  switch (typed.tag) {
    case "int":
    case "i4": {
      const n = Number(typed.text.trim());
      if (!Number.isInteger(n)) throw new XmlParseError(`bad int ${typed.text}`);
      return n;
    }
    case "boolean": {
      const flag = typed.text.trim();
      if (flag !== "0" && flag !== "1") throw new XmlParseError(`bad boolean ${flag}`);
      return flag === "1";
    }
    case "string":
      return typed.text;
    case "double": {
      const x = Number(typed.text.trim());
      if (Number.isNaN(x)) throw new XmlParseError(`bad double ${typed.text}`);
      return x;
    }
    case "dateTime.iso8601": {
      const match = DATE_RE.exec(typed.text.trim());
      if (!match) throw new XmlParseError(`bad dateTime ${typed.text}`);
      const [, y, mo, d, h, mi, s] = match;
      return new Date(+y, +mo - 1, +d, +h, +mi, +s);
    }
    case "base64":
      return new Uint8Array(Buffer.from(typed.text.replace(/\s+/g, ""), "base64"));
    case "array": {
      const data = onlyChild(typed, "data");
      return data.children.map(parseValue);
    }
    case "struct": {
      const struct: { [key: string]: RpcValue } = {};
      for (const member of typed.children) {
        if (member.tag !== "member") {
          throw new XmlParseError(`expected <member>, got <${member.tag}>`);
        }
        const name = member.children.find((c) => c.tag === "name");
        const value = member.children.find((c) => c.tag === "value");
        if (!name || !value) throw new XmlParseError("struct member needs name and value");
        struct[name.text] = parseValue(value);
      }
      return struct;
    }
    default:
      throw new XmlParseError(`unsupported value type <${typed.tag}>`);
  }
}

/** Parse a methodResponse; throws a typed RpcFault for fault responses. */
export function parseResponse(body: string): RpcValue {
  let root: XmlElement;
  try {
    root = parseXml(body);
  } catch (err) {
    throw new FaultParse(1, `unparseable response: ${(err as Error).message}`);
  }
  if (root.tag !== "methodResponse") {
    throw new FaultParse(1, `expected methodResponse, got <${root.tag}>`);
  }
  try {
    const section = onlyChild(root);
    if (section.tag === "fault") {
      const struct = parseValue(onlyChild(section, "value"));
      throw faultFromStruct(struct as { [key: string]: RpcValue });
    }
    if (section.tag !== "params") {
      throw new FaultParse(1, `unexpected <${section.tag}> in methodResponse`);
    }
    const param = onlyChild(section, "param");
    return parseValue(onlyChild(param, "value"));
  } catch (err) {
    if (err instanceof XmlParseError) {
      throw new FaultParse(1, `malformed response value: ${err.message}`);
    }
    throw err;
  }
}

export { RpcFault };
