export { ClarensClient, HandshakeError, TransportError, loadOptions } from "./client.js";
export type { ClientOptions } from "./client.js";
export { parseResponse, serializeCall } from "./codec.js";
export type { RpcValue } from "./codec.js";
export {
  FaultHandler,
  FaultNoSuchMethod,
  FaultNotAuthorized,
  FaultParse,
  FaultProtocol,
  RpcFault,
  makeFault,
} from "./faults.js";
