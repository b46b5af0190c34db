"""
Turning tweets into tokens and vectors
======================================

Every tweet goes through the same small pipeline before either detector
sees it: check-ins and links are stripped, stretched letters are squeezed,
stop words are dropped and the rest is stemmed.
"""

from tweetstorm.preprocess import Preprocessor, collapse_repeats, strip_noise, vectorize

pre = Preprocessor()

# %%
# Stretched words collapse to a single letter, so "sooooo" and "so" meet.
print(collapse_repeats("sooooo goooood!!!"))

# %%
# Foursquare-style check-ins are dropped whole; links are removed in place.
print(repr(strip_noise("I am at Starbucks (Main St)")))
print(repr(strip_noise("quake hit the coast http://t.co/abc123 stay safe")))

# %%
# The full pipeline. Hashtags and mentions keep their marker.
for text in ["Earthquakes shaking the #California coast!!!", "RIP Muhammed Ali RIP"]:
    tokens = pre(text)
    print(f"{text!r:50} -> {tokens}")

# %%
# A tweet vector is the relative frequency of each token, so it sums to one.
print(vectorize(pre("RIP Muhammed Ali RIP")))

# %%
# Stemming can be turned off, which is handy when eyeballing raw terms.
print(Preprocessor.from_options(stemming=False)("Earthquakes shaking"))
