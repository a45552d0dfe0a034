/**
 * Clarens gateway client.
 *
 * connect() runs the system.auth exchange: the client id and certificate PEM
 * travel as HTTP Basic credentials; the reply carries the server certificate,
 * the session id encrypted to the client key (RSA-OAEP/SHA-256) and the
 * client id signed by the server key (PKCS#1 v1.5 / SHA-256).  The client
 * decrypts, verifies the signature against the returned certificate and
 * verifies that certificate against the trusted CA before accepting the
 * session.  Later calls authenticate with the (client id, session id) pair.
 */

import { constants, privateDecrypt, randomBytes, verify, X509Certificate } from "node:crypto";
import { readFileSync } from "node:fs";
import { request } from "node:https";
import { RpcValue, parseResponse, serializeCall } from "./codec.js";

export class HandshakeError extends Error {}
export class TransportError extends Error {}

export interface ClientOptions {
  /** Client certificate PEM (path contents, not a path). */
  certPem: string;
  /** Client private key PEM. */
  keyPem: string;
  /** Trusted CA PEM for both TLS and the handshake chain check. */
  caPem: string;
  /** Override the RPC path; defaults to the URL path or /clarens/. */
  rpcPath?: string;
  timeoutMs?: number;
}

export function loadOptions(certPath: string, keyPath: string, caPath: string): ClientOptions {
  return {
    certPem: readFileSync(certPath, "utf8"),
    keyPem: readFileSync(keyPath, "utf8"),
    caPem: readFileSync(caPath, "utf8"),
  };
}

export class ClarensClient {
  private readonly url: URL;
  private readonly options: ClientOptions;
  clientId: string | null = null;
  serverId: string | null = null;
  serverCertPem: string | null = null;

  constructor(url: string, options: ClientOptions) {
    this.url = new URL(url);
    if (this.url.protocol !== "https:" && this.url.protocol !== "http:") {
      throw new TypeError(`unsupported URL scheme ${this.url.protocol}`);
    }
    if (options.rpcPath) {
      this.url.pathname = options.rpcPath;
    } else if (!this.url.pathname.replace(/\//g, "")) {
      this.url.pathname = "/clarens/";
    }
    this.options = options;
  }

  private post(body: string, auth: [string, string]): Promise<string> {
    const token = Buffer.from(`${auth[0]}:${auth[1]}`).toString("base64");
    return new Promise((resolve, reject) => {
      const req = request(
        this.url,
        {
          method: "POST",
          ca: this.options.caPem,
          headers: {
            "Content-Type": "text/xml",
            "Content-Length": Buffer.byteLength(body),
            Authorization: `Basic ${token}`,
          },
          timeout: this.options.timeoutMs ?? 30000,
        },
        (res) => {
          const chunks: Buffer[] = [];
          res.on("data", (chunk) => chunks.push(chunk));
          res.on("end", () => {
            const text = Buffer.concat(chunks).toString("utf8");
            if (res.statusCode !== 200) {
              reject(new TransportError(`HTTP ${res.statusCode}: ${text.slice(0, 200)}`));
            } else {
              resolve(text);
            }
          });
        },
      );
      req.on("error", reject);
      req.on("timeout", () => req.destroy(new TransportError("request timed out")));
      req.end(body);
    });
  }

  private async callRaw(method: string, params: RpcValue[], auth: [string, string]): Promise<RpcValue> {
    const body = serializeCall(method, params);
    return parseResponse(await this.post(body, auth));
  }

  /** Perform the system.auth handshake and hold the resulting session. */
  async connect(): Promise<this> {
    const clientId = randomBytes(16).toString("hex");
    const reply = await this.callRaw("system.auth", [], [clientId, this.options.certPem]);
    if (!Array.isArray(reply) || reply.length !== 3) {
      throw new HandshakeError(`system.auth returned ${JSON.stringify(reply)}`);
    }
    const [serverPem, encryptedServerId, signedClientId] = reply;
    if (
      typeof serverPem !== "string" ||
      typeof encryptedServerId !== "string" ||
      typeof signedClientId !== "string"
    ) {
      throw new HandshakeError("system.auth reply elements must be strings");
    }

    let serverId: string;
    try {
      serverId = privateDecrypt(
        {
          key: this.options.keyPem,
          padding: constants.RSA_PKCS1_OAEP_PADDING,
          oaepHash: "sha256",
        },
        Buffer.from(encryptedServerId, "base64"),
      ).toString("utf8");
    } catch (err) {
      throw new HandshakeError(`cannot decrypt session id: ${(err as Error).message}`);
    }

    const serverCert = new X509Certificate(serverPem);
    const signatureOk = verify(
      "sha256",
      Buffer.from(clientId, "utf8"),
      serverCert.publicKey,
      Buffer.from(signedClientId, "base64"),
    );
    if (!signatureOk) {
      throw new HandshakeError("server signature over the client id does not verify");
    }

    const ca = new X509Certificate(this.options.caPem);
    if (!serverCert.verify(ca.publicKey)) {
      throw new HandshakeError("server certificate is not issued by the trusted CA");
    }
    const now = new Date();
    if (now < new Date(serverCert.validFrom) || now > new Date(serverCert.validTo)) {
      throw new HandshakeError("server certificate is outside its validity window");
    }

    this.clientId = clientId;
    this.serverId = serverId;
    this.serverCertPem = serverPem;
    return this;
  }

  /** Authenticated call; throws RpcFault subclasses on wire faults. */
  async call(method: string, params: RpcValue[] = []): Promise<RpcValue> {
    if (this.clientId === null || this.serverId === null) {
      throw new HandshakeError("not connected; call connect() first");
    }
    return this.callRaw(method, params, [this.clientId, this.serverId]);
  }
}
