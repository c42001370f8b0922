/** Minimal ambient declaration for the extension APIs. */
declare const chrome: any;
