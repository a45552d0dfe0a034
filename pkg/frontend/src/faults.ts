/** Typed errors for the gateway's stable fault codes (1..5). */

export class RpcFault extends Error {
  constructor(
    public readonly code: number,
    public readonly faultString: string,
  ) {
    super(`fault ${code}: ${faultString}`);
    this.name = new.target.name;
  }
}

export class FaultParse extends RpcFault {}
export class FaultNoSuchMethod extends RpcFault {}
export class FaultNotAuthorized extends RpcFault {}
export class FaultHandler extends RpcFault {}
export class FaultProtocol extends RpcFault {}

const FAULT_TYPES: Record<number, new (code: number, message: string) => RpcFault> = {
  1: FaultParse,
  2: FaultNoSuchMethod,
  3: FaultNotAuthorized,
  4: FaultHandler,
  5: FaultProtocol,
};

export function makeFault(code: number, message: string): RpcFault {
  const ctor = FAULT_TYPES[code] ?? RpcFault;
  return new ctor(code, message);
}

export function faultFromStruct(struct: { [key: string]: unknown }): RpcFault {
  const code = typeof struct.faultCode === "number" ? struct.faultCode : -1;
  const message = typeof struct.faultString === "string" ? struct.faultString : "unknown fault";
  return makeFault(code, message);
}
