/**
 * Image preloading. A task renders only after every one of its images
 * has loaded, so the answer timer never includes network time.
 */

export type Preloader = (urls: string[]) => Promise<void>;

export const preloadImages: Preloader = (urls) =>
  Promise.all(
    urls.map(
      (url) =>
        new Promise<void>((resolve) => {
          const img = new Image();
          img.onload = () => resolve();
          img.onerror = () => resolve(); // a broken image should not hang the screen
          img.src = url;
        })
    )
  ).then(() => undefined);
