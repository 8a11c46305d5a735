/** Typed errors mapping the service's HTTP statuses. */

export class ClientError extends Error {
  constructor(
    message: string,
    readonly code?: string,
  ) {
    super(message);
    this.name = new.target.name;
  }
}

/** The server could not be reached (network failure, refused connection). */
export class ConnectionError extends ClientError {}

/** HTTP 400: the request body failed validation; message names the path. */
export class ValidationError extends ClientError {}

/** HTTP 404: unknown task, session, or rubric. */
export class NotFoundError extends ClientError {}

/** HTTP 409: session already terminal, step in flight, or conflicting content. */
export class TerminatedError extends ClientError {}

/** The server speaks a different wire-protocol version than this client. */
export class ProtocolMismatchError extends ClientError {}

export function errorForStatus(status: number, code: string, message: string): ClientError {
  if (status === 400) return new ValidationError(message, code);
  if (status === 404) return new NotFoundError(message, code);
  if (status === 409) return new TerminatedError(message, code);
  return new ClientError(`HTTP ${status}: ${message}`, code);
}
