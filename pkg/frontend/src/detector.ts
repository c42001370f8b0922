/**
 * Weighted-score login page detection.
 *
 * In-page mirror of the server-side detector: keywords in visible text
 * and attribute values (+10 each, capped at 30), a login-ish URL token
 * (+30 once), a submit control (+15), and credential input fields
 * (+60 per field).  Scores strictly above the threshold classify the
 * page as a login page.  The HTML is scanned with a small tokenizer so
 * the same code runs in the service worker and under node tests.
 */

export const DEFAULT_CONTENT_KEYWORDS: readonly string[] = [
  "username", "password", "login", "signin", "sign-in", "log in", "log-in",
  "authenticate", "credentials", "account", "identity", "user", "email",
  "e-mail", "passcode", "customer number", "pin", "secret code",
  "authentication code", "security code", "passphrase", "account number",
  "membership number", "social security number", "authorization code",
  "login code", "secure login", "unique identifier", "login id",
  "login name", "login details", "login information", "login credentials",
  "login data", "login token", "login key", "userid", "forgot", "Log in",
  "Login", "Email", "Username", "Sign in", "signed in", "Phone", "phone",
];

export const DEFAULT_URL_KEYWORDS: readonly string[] = [
  "signin", "signup", "login", "log-in", "sign-in", "sign-up",
];

const INPUT_NAME_VALUES = ["username", "userid", "email"];
const INPUT_TYPE_VALUES = ["email", "password"];
const INPUT_PLACEHOLDER_VALUES = ["username", "email", "password"];

export interface DetectionConfig {
  contentKeywords: readonly string[];
  contentKeywordWeight: number;
  contentKeywordCap: number;
  urlKeywords: readonly string[];
  urlWeight: number;
  submitWeight: number;
  inputFieldWeight: number;
  loginThreshold: number;
}

export const DEFAULT_CONFIG: DetectionConfig = {
  contentKeywords: DEFAULT_CONTENT_KEYWORDS,
  contentKeywordWeight: 10,
  contentKeywordCap: 30,
  urlKeywords: DEFAULT_URL_KEYWORDS,
  urlWeight: 30,
  submitWeight: 15,
  inputFieldWeight: 60,
  loginThreshold: 75,
};

export interface Contribution {
  kind: "keyword" | "url" | "submit" | "input";
  token: string;
  weight: number;
}

export interface DetectionReport {
  score: number;
  contributions: Contribution[];
  keywordCapped: boolean;
  threshold: number;
  isLogin: boolean;
}

const NAMED_ENTITIES: Record<string, string> = {
  amp: "&", lt: "<", gt: ">", quot: '"', apos: "'", nbsp: " ",
};

function decodeEntities(text: string): string {
  return text.replace(/&(#x?[0-9a-fA-F]+|[a-zA-Z]+);/g, (whole, body: string) => {
    if (body.startsWith("#x") || body.startsWith("#X")) {
      return String.fromCodePoint(parseInt(body.slice(2), 16));
    }
    if (body.startsWith("#")) {
      return String.fromCodePoint(parseInt(body.slice(1), 10));
    }
    return NAMED_ENTITIES[body.toLowerCase()] ?? whole;
  });
}

interface ScanResult {
  textChunks: string[];
  attrValues: string[];
  inputs: Record<string, string>[];
  hasSubmit: boolean;
}

const TAG_RE = /<(\/?)([a-zA-Z][a-zA-Z0-9:-]*)((?:"[^"]*"|'[^']*'|[^>"'])*)(\/?)>/g;
const ATTR_RE = /([a-zA-Z_:][-a-zA-Z0-9_:.]*)(?:\s*=\s*("([^"]*)"|'([^']*)'|[^\s/>]+))?/g;
const SKIP_TAGS = new Set(["script", "style"]);

function parseAttrs(raw: string): Record<string, string> {
  const attrs: Record<string, string> = {};
  for (const match of raw.matchAll(ATTR_RE)) {
    const name = match[1].toLowerCase();
    let value = "";
    if (match[2] !== undefined) {
      value = match[3] ?? match[4] ?? match[2];
    }
    attrs[name] = decodeEntities(value);
  }
  return attrs;
}

/** Scan markup for visible text, attribute values, inputs, and submits. */
export function scanHtml(html: string): ScanResult {
  const result: ScanResult = {
    textChunks: [], attrValues: [], inputs: [], hasSubmit: false,
  };
  let formDepth = 0;
  let cursor = 0;

  const emitText = (end: number) => {
    const text = decodeEntities(html.slice(cursor, end))
      .replace(/\s+/g, " ").trim();
    if (text) result.textChunks.push(text);
  };

  const handleStart = (tag: string, attrs: Record<string, string>) => {
    for (const value of Object.values(attrs)) {
      if (value) result.attrValues.push(value);
    }
    if (tag === "form") {
      formDepth += 1;
    } else if (tag === "input") {
      result.inputs.push(attrs);
      if ((attrs["type"] ?? "").toLowerCase() === "submit") result.hasSubmit = true;
    } else if (tag === "button") {
      if ((attrs["type"] ?? "").toLowerCase() === "submit" || formDepth > 0) {
        result.hasSubmit = true;
      }
    }
  };

  TAG_RE.lastIndex = 0;
  let match: RegExpExecArray | null;
  while (cursor < html.length) {
    const open = html.indexOf("<", cursor);
    if (open < 0) {
      emitText(html.length);
      break;
    }
    emitText(open);
    cursor = open;
    if (html.startsWith("<!--", cursor)) {
      const close = html.indexOf("-->", cursor);
      cursor = close < 0 ? html.length : close + 3;
      continue;
    }
    if (html.startsWith("<!", cursor) || html.startsWith("<?", cursor)) {
      const close = html.indexOf(">", cursor);
      cursor = close < 0 ? html.length : close + 1;
      continue;
    }
    TAG_RE.lastIndex = cursor;
    match = TAG_RE.exec(html);
    if (!match || match.index !== cursor) {
      // stray '<' is ordinary text
      const next = html.indexOf("<", cursor + 1);
      const end = next < 0 ? html.length : next;
      const text = decodeEntities(html.slice(cursor, end))
        .replace(/\s+/g, " ").trim();
      if (text) result.textChunks.push(text);
      cursor = end;
      continue;
    }
    const [whole, closing, rawName, rawAttrs, selfClose] = match;
    const tag = rawName.toLowerCase();
    cursor = match.index + whole.length;
    if (closing) {
      if (tag === "form" && formDepth > 0) formDepth -= 1;
      continue;
    }
    if (SKIP_TAGS.has(tag)) {
      // raw-content element: swallow everything up to its end tag
      const end = html.toLowerCase().indexOf(`</${tag}`, cursor);
      if (end < 0) break;
      const endClose = html.indexOf(">", end);
      cursor = endClose < 0 ? html.length : endClose + 1;
      continue;
    }
    const attrs = parseAttrs(rawAttrs);
    handleStart(tag, attrs);
    if (selfClose && tag === "form" && formDepth > 0) formDepth -= 1;
  }
  return result;
}

function inputMatchToken(attrs: Record<string, string>): string | null {
  const name = (attrs["name"] ?? "").toLowerCase();
  if (INPUT_NAME_VALUES.includes(name)) return `name="${name}"`;
  const type = (attrs["type"] ?? "").toLowerCase();
  if (INPUT_TYPE_VALUES.includes(type)) return `type="${type}"`;
  const placeholder = (attrs["placeholder"] ?? "").toLowerCase();
  for (const token of INPUT_PLACEHOLDER_VALUES) {
    if (placeholder.includes(token)) return `placeholder~"${token}"`;
  }
  return null;
}

export function detectLogin(
  html: string, url: string, config: DetectionConfig = DEFAULT_CONFIG,
): DetectionReport {
  const scan = scanHtml(html);
  const haystack = [...scan.textChunks, ...scan.attrValues].join("\n");

  const contributions: Contribution[] = [];
  let keywordTotal = 0;
  let keywordCapped = false;
  for (const keyword of config.contentKeywords) {
    if (haystack.includes(keyword)) {
      const grant = Math.min(
        config.contentKeywordWeight, config.contentKeywordCap - keywordTotal);
      if (grant < config.contentKeywordWeight) keywordCapped = true;
      keywordTotal += grant;
      contributions.push({ kind: "keyword", token: keyword, weight: grant });
    }
  }

  let score = keywordTotal;
  for (const keyword of config.urlKeywords) {
    if (url.includes(keyword)) {
      score += config.urlWeight;
      contributions.push({ kind: "url", token: keyword, weight: config.urlWeight });
      break;
    }
  }

  if (scan.hasSubmit) {
    score += config.submitWeight;
    contributions.push({ kind: "submit", token: "submit control",
                         weight: config.submitWeight });
  }
  for (const attrs of scan.inputs) {
    const token = inputMatchToken(attrs);
    if (token !== null) {
      score += config.inputFieldWeight;
      contributions.push({ kind: "input", token, weight: config.inputFieldWeight });
    }
  }

  return {
    score,
    contributions,
    keywordCapped,
    threshold: config.loginThreshold,
    isLogin: score > config.loginThreshold,
  };
}
