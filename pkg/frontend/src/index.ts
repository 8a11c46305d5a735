export { SimClient, ClientSession, runEpisode, runEpisodeBatch } from './client.js';
export type { Policy, EpisodeResult } from './client.js';
export {
  ClientError,
  ConnectionError,
  NotFoundError,
  ProtocolMismatchError,
  TerminatedError,
  ValidationError,
} from './errors.js';
export * from './types.js';
